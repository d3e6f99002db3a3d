#include <immintrin.h>

#include <cmath>
#include <limits>

#include "scan_kernels.hpp"

namespace kamnf::detail {

ScanResult scan_avx2(const ScanInput& in, std::size_t begin, std::size_t end)
{
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d best_idx = _mm256_set1_pd(double(begin));
    __m256d idx = _mm256_setr_pd(double(begin), double(begin + 1), double(begin + 2), double(begin + 3));
    const __m256d step = _mm256_set1_pd(4.0);
    std::size_t k = begin;
    for (; k + 4 <= end; k += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t i = 0; i < in.n_modes; ++i) {
            __m256d c = _mm256_loadu_pd(in.coef + i * in.n + k);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(c, _mm256_set1_pd(in.omega[i])));
        }
        __m256d r = _mm256_mul_pd(_mm256_andnot_pd(sign, acc), _mm256_loadu_pd(in.inv_weight + k));
        __m256d lt = _mm256_cmp_pd(r, best, _CMP_LT_OQ);
        best = _mm256_blendv_pd(best, r, lt);
        best_idx = _mm256_blendv_pd(best_idx, idx, lt);
        idx = _mm256_add_pd(idx, step);
    }
    alignas(32) double lane_best[4];
    alignas(32) double lane_idx[4];
    _mm256_store_pd(lane_best, best);
    _mm256_store_pd(lane_idx, best_idx);
    ScanResult out{std::numeric_limits<double>::infinity(), begin};
    for (int l = 0; l < 4; ++l) {
        auto li = std::size_t(lane_idx[l]);
        if (lane_best[l] < out.min_ratio || (lane_best[l] == out.min_ratio && li < out.argmin)) {
            out.min_ratio = lane_best[l];
            out.argmin = li;
        }
    }
    for (; k < end; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < in.n_modes; ++i) acc = acc + in.coef[i * in.n + k] * in.omega[i];
        double r = std::fabs(acc) * in.inv_weight[k];
        if (r < out.min_ratio) {
            out.min_ratio = r;
            out.argmin = k;
        }
    }
    return out;
}

} // namespace kamnf::detail
