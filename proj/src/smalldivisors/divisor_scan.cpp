#include <cmath>
#include <limits>
#include <stdexcept>

#include "scan_kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>
#define KAMNF_HAVE_NEON 1
#endif

namespace kamnf {

namespace detail {

ScanResult scan_scalar(const ScanInput& in, std::size_t begin, std::size_t end)
{
    ScanResult out{std::numeric_limits<double>::infinity(), begin};
    for (std::size_t k = begin; k < end; ++k) {
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

#if KAMNF_HAVE_NEON
ScanResult scan_neon(const ScanInput& in, std::size_t begin, std::size_t end)
{
    ScanResult lanes[2] = {{std::numeric_limits<double>::infinity(), begin},
                           {std::numeric_limits<double>::infinity(), begin}};
    std::size_t k = begin;
    for (; k + 2 <= end; k += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::size_t i = 0; i < in.n_modes; ++i)
            acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(in.coef + i * in.n + k), vdupq_n_f64(in.omega[i])));
        float64x2_t r = vmulq_f64(vabsq_f64(acc), vld1q_f64(in.inv_weight + k));
        double rr[2];
        vst1q_f64(rr, r);
        for (int l = 0; l < 2; ++l)
            if (rr[l] < lanes[l].min_ratio) {
                lanes[l].min_ratio = rr[l];
                lanes[l].argmin = k + l;
            }
    }
    ScanResult out = lanes[0];
    if (lanes[1].min_ratio < out.min_ratio || (lanes[1].min_ratio == out.min_ratio && lanes[1].argmin < out.argmin))
        out = lanes[1];
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
#else
ScanResult scan_neon(const ScanInput&, std::size_t, std::size_t)
{
    throw std::invalid_argument("divisor_scan: NEON kernel not built");
}
#endif

#ifndef KAMNF_HAVE_AVX2
ScanResult scan_avx2(const ScanInput&, std::size_t, std::size_t)
{
    throw std::invalid_argument("divisor_scan: AVX2 kernel not built");
}
#endif

} // namespace detail

namespace {

bool avx2_supported()
{
#if defined(KAMNF_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    static const bool ok = __builtin_cpu_supports("avx2");
    return ok;
#else
    return false;
#endif
}

bool neon_supported()
{
#if KAMNF_HAVE_NEON
    return true;
#else
    return false;
#endif
}

ScanKernel resolve(ScanKernel k)
{
    if (k == ScanKernel::Auto) {
        if (avx2_supported()) return ScanKernel::Avx2;
        if (neon_supported()) return ScanKernel::Neon;
        return ScanKernel::Scalar;
    }
    if (k == ScanKernel::Avx2 && !avx2_supported())
        throw std::invalid_argument("divisor_scan: AVX2 kernel unavailable on this machine");
    if (k == ScanKernel::Neon && !neon_supported())
        throw std::invalid_argument("divisor_scan: NEON kernel unavailable on this machine");
    return k;
}

} // namespace

std::vector<ScanKernel> available_scan_kernels()
{
    std::vector<ScanKernel> out{ScanKernel::Scalar};
    if (avx2_supported()) out.push_back(ScanKernel::Avx2);
    if (neon_supported()) out.push_back(ScanKernel::Neon);
    return out;
}

const char* scan_kernel_name(ScanKernel k)
{
    switch (k) {
    case ScanKernel::Auto: return "auto";
    case ScanKernel::Scalar: return "scalar";
    case ScanKernel::Avx2: return "avx2";
    case ScanKernel::Neon: return "neon";
    }
    return "unknown";
}

ScanResult divisor_scan(const DivisorTable& table, const double* omega_values, ScanKernel kernel)
{
    detail::ScanInput in{table.coefficients(0), table.inverse_weights(), omega_values, table.modes().size(),
                         table.size()};
    switch (resolve(kernel)) {
    case ScanKernel::Avx2: return detail::scan_avx2(in, 0, table.size());
    case ScanKernel::Neon: return detail::scan_neon(in, 0, table.size());
    default: return detail::scan_scalar(in, 0, table.size());
    }
}

} // namespace kamnf
