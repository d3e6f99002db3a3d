#pragma once

#include <random>
#include <vector>

#include "kamnf/hamiltonian.hpp"

namespace kamnf::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return lo + (hi - lo) * double(rng() >> 11) * 0x1.0p-53;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi)
{
    return lo + int(rng() % uint64_t(hi - lo + 1));
}

inline MultiIndex random_index(std::mt19937_64& rng, int j_max, int mass)
{
    MultiIndex a;
    for (int i = 0; i < mass; ++i) a.add(uniform_int(rng, -j_max, j_max), 1);
    return a;
}

// Real, mass-conserving Hamiltonian with n_pairs random conjugate pairs of degree <= max_degree.
inline Hamiltonian random_hamiltonian(std::mt19937_64& rng, const ModeSet& modes, int max_degree, int n_pairs,
                                      bool momentum_preserving = false, int min_half_degree = 1)
{
    Hamiltonian h(modes, max_degree);
    int j_max = modes.j_max();
    for (int n = 0; n < n_pairs; ++n) {
        int half = uniform_int(rng, min_half_degree, max_degree / 2);
        MultiIndex a = random_index(rng, j_max, half);
        MultiIndex b = random_index(rng, j_max, half);
        if (momentum_preserving) {
            for (int tries = 0; tries < 200 && a.momentum() != b.momentum(); ++tries) b = random_index(rng, j_max, half);
            if (a.momentum() != b.momentum()) b = a;
        }
        cplx c(uniform(rng, -1, 1), uniform(rng, -1, 1));
        h.add_real_pair(a, b, c);
    }
    return h;
}

inline double max_abs_coeff(const Hamiltonian& h)
{
    double m = 0.0;
    for (const auto& t : h.terms()) m = std::max(m, std::abs(t.coeff));
    return m;
}

// max |a - b| relative to max(|a|, |b|, floor)
inline double relative_difference(const Hamiltonian& a, const Hamiltonian& b, double floor = 1e-300)
{
    Hamiltonian d = a - b;
    double scale = std::max({max_abs_coeff(a), max_abs_coeff(b), floor});
    return max_abs_coeff(d) / scale;
}

} // namespace kamnf::testing
