#include "routecast/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace routecast::kernels {

namespace detail {

double normalize_log_weights_scalar(std::span<const double> w, std::span<double> out) {
    if (w.empty()) {
        throw std::invalid_argument("normalize_log_weights: empty input");
    }
    const double ninf = -std::numeric_limits<double>::infinity();
    double m = ninf;
    for (double x : w) {
        m = std::max(m, x);
    }
    if (m == ninf) {
        throw std::invalid_argument("normalize_log_weights: all weights are -inf");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = std::exp(w[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] /= sum;
    }
    return m + std::log(sum);
}

BitsetOverlap bitset_overlap_scalar(std::span<const std::uint64_t> a,
                                    std::span<const std::uint64_t> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("bitset_overlap: size mismatch");
    }
    BitsetOverlap r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        r.both += static_cast<std::uint64_t>(std::popcount(a[i] & b[i]));
        r.either += static_cast<std::uint64_t>(std::popcount(a[i] | b[i]));
    }
    return r;
}

}  // namespace detail

namespace {

using NormalizeFn = double (*)(std::span<const double>, std::span<double>);
using OverlapFn = BitsetOverlap (*)(std::span<const std::uint64_t>,
                                    std::span<const std::uint64_t>);

struct Dispatch {
    NormalizeFn normalize = detail::normalize_log_weights_scalar;
    OverlapFn overlap = detail::bitset_overlap_scalar;
    std::string_view name = "scalar";
};

Dispatch select() {
    Dispatch d;
#if defined(__x86_64__)
    if (detail::cpu_has_avx2()) {
        d.normalize = detail::normalize_log_weights_avx2;
        d.overlap = detail::bitset_overlap_avx2;
        d.name = "avx2";
    }
#endif
    return d;
}

const Dispatch& dispatch() {
    static const Dispatch d = select();
    return d;
}

}  // namespace

double normalize_log_weights(std::span<const double> w, std::span<double> out) {
    return dispatch().normalize(w, out);
}

BitsetOverlap bitset_overlap(std::span<const std::uint64_t> a,
                             std::span<const std::uint64_t> b) {
    return dispatch().overlap(a, b);
}

std::string_view active_variant() { return dispatch().name; }

}  // namespace routecast::kernels
