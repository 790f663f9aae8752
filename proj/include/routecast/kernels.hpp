#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace routecast::kernels {

struct BitsetOverlap {
    std::uint64_t both = 0;    // popcount(a & b)
    std::uint64_t either = 0;  // popcount(a | b)
};

// Max-shifted exponential normalization:
//   out[i] = exp(w[i] - max w) / sum_j exp(w[j] - max w)
// Entries of -inf normalize to probability 0. Returns log(sum_j exp(w[j])).
// Throws std::invalid_argument when w is empty or every entry is -inf
// (the normalization would be 0/0). NaN inputs are not supported.
double normalize_log_weights(std::span<const double> w, std::span<double> out);

// Intersection and union cardinalities of two equally sized bit vectors.
// Throws std::invalid_argument on size mismatch.
BitsetOverlap bitset_overlap(std::span<const std::uint64_t> a,
                             std::span<const std::uint64_t> b);

// Kernel variant selected at load time: "avx2" or "scalar".
std::string_view active_variant();

// Reference and vector implementations, exposed for equivalence tests.
namespace detail {

double normalize_log_weights_scalar(std::span<const double> w, std::span<double> out);
BitsetOverlap bitset_overlap_scalar(std::span<const std::uint64_t> a,
                                    std::span<const std::uint64_t> b);

#if defined(__x86_64__)
bool cpu_has_avx2();
double normalize_log_weights_avx2(std::span<const double> w, std::span<double> out);
BitsetOverlap bitset_overlap_avx2(std::span<const std::uint64_t> a,
                                  std::span<const std::uint64_t> b);
#endif

}  // namespace detail

}  // namespace routecast::kernels
