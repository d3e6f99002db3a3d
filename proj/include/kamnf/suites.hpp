#pragma once

#include <cstdint>
#include <vector>

#include "kamnf/hamiltonian.hpp"
#include "kamnf/random.hpp"
#include "kamnf/smalldivisors.hpp"
#include "kamnf/torus.hpp"

namespace kamnf {

// Real, mass-conserving Hamiltonian with n_pairs random conjugate pairs of degree <= max_degree.
Hamiltonian random_real_hamiltonian(Rng& rng, const ModeSet& modes, int max_degree, int n_pairs,
                                    bool momentum_preserving = false, int min_half_degree = 1);

// Torus with r = 1, |sqrt I|_{p,s,a} = ratio and nonzero actions on |j| <= support.
TorusData random_profile_torus(Rng& rng, const ModeSet& modes, double kappa, double ratio, int support);

// Randomised identities checked to relative tolerance `tol`: projection algebra, R/K split, degree
// laws of the bracket, homological round trip, counter-term norm identity, split_min/merge bijection.
std::vector<VerifierReport> algebra_suite(uint64_t seed, int instances, double tol = 1e-12);

// Randomised norm inequalities: bracket, Lie transform, projection and tail bounds, smoothing,
// homological bound, counter-term bound along KAM steps, NLS regularity.
std::vector<VerifierReport> inequality_suite(uint64_t seed, int instances);

struct LemmaRanges {
    std::vector<double> kappa2 = {0.25, 0.5, 0.7};
    int binomial_q_max = 4;
    int binomial_mass_max = 8;
    int binomial_j_max = 4;
    std::vector<double> thetas = {0.3, 0.5, 0.8};
    int smoothing_mass_max = 3;
    int smoothing_j_max = 4;
    int divisor_mass_max = 3;
    int divisor_j_max = 4;
};

// Brute-force lemma verifiers over the given ranges; the smoothing and small-divisor checks run at
// every theta. `inject_fault` flips one inequality.
std::vector<VerifierReport> lemma_verifiers(const LemmaRanges& ranges, bool inject_fault = false);

struct MeasureFit {
    double slope = 0.0;
    double intercept = 0.0;
    double intercept_stderr = 0.0;   // from the binomial errors of the fractions
    double max_ratio = 0.0;          // max fraction / gamma
};

// Least-squares line fraction = intercept + slope gamma over Monte Carlo fractions of n samples each.
MeasureFit fit_measure_line(const std::vector<double>& gammas, const std::vector<double>& fractions, long n_samples);

} // namespace kamnf
