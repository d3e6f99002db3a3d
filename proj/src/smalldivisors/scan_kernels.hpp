#pragma once

#include <cstddef>

#include "kamnf/smalldivisors.hpp"

namespace kamnf::detail {

// Scans divisors [begin, end) of a mode-major coefficient table with `n` columns. Each kernel
// forms acc = acc + coef * omega mode by mode, then |acc| * inv_weight, and keeps the first minimum.
struct ScanInput {
    const double* coef;
    const double* inv_weight;
    const double* omega;
    std::size_t n_modes;
    std::size_t n;
};

ScanResult scan_scalar(const ScanInput& in, std::size_t begin, std::size_t end);
ScanResult scan_avx2(const ScanInput& in, std::size_t begin, std::size_t end);
ScanResult scan_neon(const ScanInput& in, std::size_t begin, std::size_t end);

} // namespace kamnf::detail
