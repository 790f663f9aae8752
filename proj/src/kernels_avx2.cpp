#if defined(__x86_64__)

#include "routecast/kernels.hpp"

#include <immintrin.h>

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace routecast::kernels::detail {

bool cpu_has_avx2() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

// exp(x) for x <= 0; Cephes-style rational approximation over [-0.5 ln2, 0.5 ln2]
// with 2^n scaling. Arguments below -708.0 (including -inf) flush to exactly 0;
// their softmax contribution is sub-denormal anyway.
inline __m256d exp_nonpos_pd(__m256d x) {
    const __m256d underflow = _mm256_set1_pd(-708.0);
    const __m256d zero_mask = _mm256_cmp_pd(x, underflow, _CMP_LT_OQ);
    x = _mm256_max_pd(x, underflow);

    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);

    // r = x - n*ln2, with ln2 split into hi/lo parts
    const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

    const __m256d rr = _mm256_mul_pd(r, r);
    __m256d px = _mm256_fmadd_pd(p0, rr, p1);
    px = _mm256_fmadd_pd(px, rr, p2);
    px = _mm256_mul_pd(px, r);
    __m256d qx = _mm256_fmadd_pd(q0, rr, q1);
    qx = _mm256_fmadd_pd(qx, rr, q2);
    qx = _mm256_fmadd_pd(qx, rr, q3);

    __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

    // scale by 2^n; n lies in [-1022, 0] so the biased exponent stays normal
    const __m128i n32 = _mm256_cvtpd_epi32(n);
    const __m256i n64 = _mm256_cvtepi32_epi64(n32);
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    e = _mm256_mul_pd(e, _mm256_castsi256_pd(bits));

    return _mm256_andnot_pd(zero_mask, e);
}

// per-64-bit-lane population counts via the nibble lookup trick
inline __m256i popcount_epi64(__m256i v) {
    const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                         0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    const __m256i low_mask = _mm256_set1_epi8(0x0f);
    const __m256i lo = _mm256_and_si256(v, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
    const __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo),
                                        _mm256_shuffle_epi8(lut, hi));
    return _mm256_sad_epu8(cnt, _mm256_setzero_si256());
}

inline double hsum_pd(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

inline std::uint64_t hsum_epi64(__m256i v) {
    alignas(32) std::uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), v);
    return lanes[0] + lanes[1] + lanes[2] + lanes[3];
}

}  // namespace

double normalize_log_weights_avx2(std::span<const double> w, std::span<double> out) {
    const std::size_t n = w.size();
    if (n == 0) {
        throw std::invalid_argument("normalize_log_weights: empty input");
    }
    const double ninf = -std::numeric_limits<double>::infinity();

    double m = ninf;
    std::size_t i = 0;
    if (n >= 4) {
        __m256d vmax = _mm256_loadu_pd(w.data());
        for (i = 4; i + 4 <= n; i += 4) {
            vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(w.data() + i));
        }
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, vmax);
        m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    } else {
        i = 0;
    }
    for (; i < n; ++i) {
        m = std::max(m, w[i]);
    }
    if (m == ninf) {
        throw std::invalid_argument("normalize_log_weights: all weights are -inf");
    }

    const __m256d vm = _mm256_set1_pd(m);
    __m256d vsum = _mm256_setzero_pd();
    for (i = 0; i + 4 <= n; i += 4) {
        const __m256d e = exp_nonpos_pd(_mm256_sub_pd(_mm256_loadu_pd(w.data() + i), vm));
        _mm256_storeu_pd(out.data() + i, e);
        vsum = _mm256_add_pd(vsum, e);
    }
    double sum = hsum_pd(vsum);
    for (; i < n; ++i) {
        out[i] = std::exp(w[i] - m);
        sum += out[i];
    }

    const __m256d vs = _mm256_set1_pd(sum);
    for (i = 0; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out.data() + i, _mm256_div_pd(_mm256_loadu_pd(out.data() + i), vs));
    }
    for (; i < n; ++i) {
        out[i] /= sum;
    }
    return m + std::log(sum);
}

BitsetOverlap bitset_overlap_avx2(std::span<const std::uint64_t> a,
                                  std::span<const std::uint64_t> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("bitset_overlap: size mismatch");
    }
    const std::size_t n = a.size();
    __m256i vboth = _mm256_setzero_si256();
    __m256i veither = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a.data() + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b.data() + i));
        vboth = _mm256_add_epi64(vboth, popcount_epi64(_mm256_and_si256(va, vb)));
        veither = _mm256_add_epi64(veither, popcount_epi64(_mm256_or_si256(va, vb)));
    }
    BitsetOverlap r;
    r.both = hsum_epi64(vboth);
    r.either = hsum_epi64(veither);
    for (; i < n; ++i) {
        r.both += static_cast<std::uint64_t>(std::popcount(a[i] & b[i]));
        r.either += static_cast<std::uint64_t>(std::popcount(a[i] | b[i]));
    }
    return r;
}

}  // namespace routecast::kernels::detail

#endif  // __x86_64__
