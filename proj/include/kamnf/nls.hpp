#pragma once

#include <iosfwd>
#include <map>
#include <utility>

#include "kamnf/kam.hpp"

namespace kamnf {

// f(x, y) = sum_d sum_k f^{(d)}_k e^{ikx} y^d, analytic in a strip of width a_strip and a y-ball of radius R.
struct NonlinearitySpec {
    std::map<std::pair<int, int>, cplx> coeffs;   // (d, k) -> f^{(d)}_k
    double a_strip = 4.0;
    double R = 1.0;

    // f = c y^d
    static NonlinearitySpec power(int d, double c = 1.0);
    // |f|_{a,R} = sum_d sup_k |f^{(d)}_k| e^{a|k|} R^d
    double norm() const;
    // Throws std::invalid_argument unless d >= 1, a_strip > 0, R > 0 and f^{(d)}_{-k} = conj f^{(d)}_k.
    void validate() const;
    bool translation_invariant() const;
};

void write_nonlinearity(std::ostream& os, const NonlinearitySpec& f);
NonlinearitySpec read_nonlinearity(std::istream& is);

// P = int F(x, |u(x)|^2) dx/(2 pi) with F = int_0^y f: coefficient f^{(d)}_{-pi(alpha-beta)} (n!/alpha!)(n!/beta!)/n
// on |alpha| = |beta| = n = d + 1.
Hamiltonian build_nls_perturbation(const NonlinearitySpec& f, const ModeSet& modes, int degree_cutoff);

// 2^{p+1} (1 + 2 zeta(p))
double c_alg(double p);
// sup_j e^{-t|j| + s <j>^theta} <j>^p
double c_weight(double p, double s, double t, double theta);

struct RegularityReport {
    double lhs = 0.0;    // |P|_{r,s,eta}
    double rhs = 0.0;    // C(p, s, a_strip - a - eta) (C_alg r)^2 |f| / R
    double c_alg = 0.0;
    double c_weight = 0.0;
    bool holds = false;
};

// Throws std::invalid_argument unless (C_alg r)^2 <= R and a + eta < a_strip.
RegularityReport verify_regularity_bound(const Hamiltonian& p, const NonlinearitySpec& f, const WeightParams& w);

// V_j = Lambda_j + omega_j - j^2
RealModeArray potential_from_counterterm(const CounterTerm& lambda, const FrequencyVector& omega);

// Parameters derived from the target regularity (s, a) and the ball radius r.
struct NlsParams {
    double r = 0.0;
    double s = 1.0;
    double a = 0.0;
    double p = 2.0;
    double theta = 0.5;
};

// r0 = 2 sqrt 2 r, rho = r0 - 2r, eta0 = (a_strip - a)/2, sigma = min(s, eta0, 2)/2, s0 = s - sigma.
KamConfig nls_kam_config(const NlsParams& tp, const NonlinearitySpec& f, const KamConfig& base);
// I_j = (r^2/4) <j>^{-2p} e^{-2a|j| - 2s<j>^theta} on |j| <= support (and on S when a split is set).
TorusData nls_profile_torus(const ModeSet& modes, const NlsParams& tp, int support);
// ln eps_* = -2 ln K - ln(8 C_alg^2 C(p, s0, eta0)).
double log_eps_star(const KamConfig& cfg, const NonlinearitySpec& f);

// Rejection sample of xi in [-1/2, 1/2]^N with omega Diophantine on the scheme divisors.
FrequencyVector sample_scheme_frequency(const ModeSet& modes, double gamma, int degree_cutoff, uint64_t seed,
                                        int max_tries = 100000);

struct PotentialResult {
    RealModeArray V;
    KamRunResult run;
    Hamiltonian P;
    double smallness = 0.0;        // |f| r^2 / (gamma R)
    double log_eps_star = 0.0;
};

// Builds P, runs the counter-term scheme with N0 = D_omega and maps Lambda to the potential.
PotentialResult run_potential_theorem(const NonlinearitySpec& f, const FrequencyVector& omega, const TorusData& torus,
                                  const KamConfig& cfg, double r);

} // namespace kamnf
