#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kamnf/hamiltonian.hpp"
#include "kamnf/smalldivisors.hpp"
#include "kamnf/torus.hpp"

namespace kamnf {

class KamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KamConfig {
    WeightParams weights;      // p, a, theta are used; r, s, eta come from the schedule
    double r0 = 1.0;
    double s0 = 1.0;
    double eta0 = 1.0;
    double rho = 0.25;
    double sigma = 0.25;
    double r = 0.35;           // radius of the ball containing sqrt(I)
    double gamma = 0.1;
    int degree_cutoff = 8;
    int max_steps = 8;
    double eps_target = 1e-10;
    double chi = 1.5;
    double frak_C = 1024.0;
    int lie_k_max = 0;         // 0: stop on relative tolerance
    int flow_steps = 32;       // RK4 steps for point evaluation of Psi
    double neumann_tol = 1e-15;

    // Throws std::invalid_argument unless 0 < rho < r0/2, 0 < r <= r0/(2 sqrt 2), 0 < sigma < min(eta0/2, 1).
    void validate() const;
    WeightParams at(double r_, double s_, double eta_) const { return weights.with(r_, s_, eta_); }
};

struct ScheduleValues {
    double r = 0.0;
    double s = 0.0;
    double eta = 0.0;
    double rho = 0.0;
    double sigma = 0.0;
};

// rho_n = (rho/4) 2^{-n}, sigma_0 = sigma/8, sigma_n = 9 sigma/(4 pi^2 n^2); (r, s, eta)_n after n updates.
ScheduleValues schedule(int n, const KamConfig& cfg);
ScheduleValues schedule_limit(const KamConfig& cfg);

// Linear map h -> sum_j h_j columns[j], the images of |u_j|^2 - I_j.
struct CounterOperator {
    ModeSet modes;
    std::vector<Hamiltonian> columns;   // indexed by modes.index(j)

    CounterOperator() = default;
    CounterOperator(const ModeSet& m, int degree_cutoff);
    Hamiltonian apply(const CounterTerm& h) const;
    bool zero() const;
    // max_j |column_j| at the given weights, a bound for the operator norm from l^inf.
    double column_bound(const WeightParams& w) const;
};

struct NeumannResult {
    CounterTerm x;
    int iterations = 0;
    double residual = 0.0;   // |(Id + M) x - rhs|_inf
};

// sum_k (-M)^k rhs, stopped once an increment is below tol. Throws KamError when increments grow
// three times in a row or the iteration cap is hit.
NeumannResult neumann_invert(const std::function<CounterTerm(const CounterTerm&)>& apply_M, const CounterTerm& rhs,
                             double tol, int max_iterations = 500);

// Degree pieces entering the smallness parameters.
struct SmallnessParts {
    double zero_K = 0.0;     // |Pi^{0,K} G|_inf
    double zero_R = 0.0;     // |Pi^{0,R} G|
    double minus_two = 0.0;  // |Pi^{-2} G|
    double minus_one = 0.0;  // |Pi^{-1} G| (zero on a full torus)
    double high = 0.0;       // |Pi^{>=1} G|
    double eps = 0.0;
    double theta = 0.0;
};

SmallnessParts smallness(const Hamiltonian& g, const TorusData& torus, const WeightParams& w, double gamma);

struct KamState {
    int n = 0;
    Hamiltonian G;
    CounterOperator L;
    CounterTerm Lambda;                 // sum of the counter-term corrections so far
    double eps = 0.0;
    double theta = 0.0;
    ScheduleValues sched;
    std::vector<Hamiltonian> S;         // generating functions S_0 .. S_{n-1}
    double truncation_residual = 0.0;   // dropped norm of G so far
};

KamState initial_state(const Hamiltonian& g0, const TorusData& torus, const KamConfig& cfg);

struct StepDiagnostics {
    int n = 0;
    double eps = 0.0;            // eps_n before the step
    double theta = 0.0;
    double eps_next = 0.0;
    double theta_next = 0.0;
    double lambda_bar_sup = 0.0;
    double m_norm = 0.0;         // l^inf operator norm of M_n
    int neumann_iterations = 0;
    double neumann_residual = 0.0;
    double homological_residual = 0.0;   // |Pi^{<=0}(equation)| relative to |G_n|
    double s_norm = 0.0;         // |S_n| at (r_n - rho_n, s_{n+1}, eta_{n+1})
    double column_increment = 0.0;       // max_j |(L_{n+1} - L_n) e_j|
    double column_dropped = 0.0;         // sum_j dropped norm of the columns
    double trunc_residual = 0.0;         // dropped norm of G in this step
    int lie_terms = 0;
    double wall_ms = 0.0;
};

struct KamStepResult {
    KamState next;
    Hamiltonian S;
    CounterTerm lambda_bar;
    StepDiagnostics diag;
};

// One step of the counter-term scheme; the triangular system for S^{(-2)}, S^{(-1)}, Lambda_bar, S^{(0,R)}
// is solved with Lambda_bar obtained from the affine dependence of the Pi^{0,K} equation.
KamStepResult kam_step(const KamState& state, const FrequencyVector& omega, const TorusData& torus,
                       const KamConfig& cfg);

struct KamRunResult {
    CounterTerm Lambda;
    Hamiltonian N;                       // D_omega + G_final
    std::vector<Hamiltonian> S;
    std::vector<StepDiagnostics> steps;
    double eps0 = 0.0;
    double theta0 = 0.0;
    double eps_final = 0.0;
    bool converged = false;
    std::string failure;
    double truncation_residual = 0.0;
    double log_K = 0.0;                  // ln of the constant K of the smallness condition
    double log_C_bar = 0.0;              // ln(2^7 K)
    bool theory_smallness = false;       // eps0 <= (1 + Theta0)^{-3} K^{-2}
    double K_fit = 0.0;
    double elapsed_ms = 0.0;
};

// Iterates kam_step on G0 = H - D_omega until eps_n < eps_target, max_steps, or three
// non-decreasing steps.
KamRunResult run_counterterm_theorem(const Hamiltonian& g0, const FrequencyVector& omega, const TorusData& torus,
                                     const KamConfig& cfg);

// Constant C with ln C(sigma) <= C sigma^{-3/theta} for the homological bound, maximised over sigma in (0, 1].
double homological_power_constant(double theta);
// ln K = ln frak_C + 4 ln(r0/rho) + sup_n (4n ln 2 + 2 C' n^{6/theta} - chi^n (2 - chi)).
double log_frak_K(const KamConfig& cfg);

struct QuadraticFit {
    double K_fit = 0.0;
    double worst_ratio = 0.0;   // max_n eps_{n+1} / (K_fit eps_n^2)
    int used = 0;
};
// Geometric-mean fit of eps_{n+1} / eps_n^2 over steps with eps_{n+1} above `floor`.
QuadraticFit fit_quadratic_constant(const std::vector<StepDiagnostics>& steps, double floor = 1e-15);

// Psi(u) = Phi_{S_0}(Phi_{S_1}(... Phi_{S_{n-1}}(u))).
StateVector apply_psi(const std::vector<Hamiltonian>& S, const StateVector& u, int steps, std::size_t count = SIZE_MAX);

struct InvarianceReport {
    int points = 0;
    double max_defect = 0.0;
    std::vector<double> defects;
};

// |X_{(Lambda + H) o Psi}(u) - X_{D_omega}(u)| at random points of the torus, in the w^inf norm of `w`.
InvarianceReport check_invariance(const Hamiltonian& h, const CounterTerm& lambda, const std::vector<Hamiltonian>& S,
                                  const FrequencyVector& omega, const TorusData& torus, int n_points, uint64_t seed,
                                  int flow_steps, const WeightParams& w);

// sup over sampled torus points of |Psi_{n+1}(u) - Psi_n(u)| for each n.
std::vector<double> psi_increments(const std::vector<Hamiltonian>& S, const TorusData& torus, int n_points,
                                   uint64_t seed, int flow_steps, const WeightParams& w);

// Lipschitz-family mode: runs the scheme at k frequencies within `radius` of omega and
// reports the pairwise Lipschitz quotient of Lambda.
struct LipschitzRun {
    std::vector<FrequencyVector> omegas;
    std::vector<CounterTerm> lambdas;
    double lipschitz = 0.0;
};
LipschitzRun run_lipschitz_family(const Hamiltonian& g0, const FrequencyVector& omega, double radius, int k,
                                  uint64_t seed, const TorusData& torus, const KamConfig& cfg);

// Divisors that can occur in the scheme: mass and momentum zero, |ell| <= L, at most
// `normal_l1` entries on normal modes.
std::vector<DivisorVector> scheme_divisors(const ModeSet& modes, int L, int normal_l1 = 2);

struct FrequencyMapResult {
    RealModeArray Omega;            // on the normal modes
    CounterTerm Lambda;
    int iterations = 0;
    double residual = 0.0;          // sup_j |Omega_j + mu_j - j^2 - W_j|
    bool converged = false;
    double lipschitz = 0.0;         // measured Lipschitz constant of mu
    int extension_uses = 0;         // evaluations answered by the Lipschitz extension
    double eps = 0.0;               // gamma^{-1} |P|_{r0,s0,eta0}
    double deviation = 0.0;         // sup_j |Omega_j - j^2 - W_j|
    std::vector<double> history;    // sup-norm change per iteration
    KamRunResult last_run;
};

// Solves Omega_j + mu_j(alpha, Omega) = j^2 + W_j by fixed-point iteration, with mu from the
// counter-term run at omega = (alpha, Omega) and its McShane extension off the Diophantine set.
FrequencyMapResult solve_frequency_map(const RealModeArray& alpha, const RealModeArray& W, const Hamiltonian& p,
                                       const TorusData& torus, const KamConfig& cfg, double tol = 1e-12,
                                       int max_iterations = 30);

struct MelnikovReport {
    VerifierReport report;
    double min_margin = 0.0;   // min |alpha.h + s Omega_j + s' Omega_k| / threshold
    std::string witness;
};

// Second Melnikov conditions for h on S with |h| <= h_mass_max, j, k normal, s, s' in {-1, 0, 1},
// pi(h) + s j + s' k = 0 and nonzero combined index.
MelnikovReport melnikov_check(const RealModeArray& alpha, const RealModeArray& Omega, int h_mass_max, double gamma);

// Fraction of alpha in Q_S with (alpha, Omega(alpha)) failing the momentum-zero condition with
// |ell| <= L and at most two entries on normal modes. `omega_map` defaults to Omega_j = j^2 + W_j.
double measure_lowdim(double gamma, const ModeSet& modes, int L, long n_samples, uint64_t seed, const RealModeArray& W,
                      const std::function<RealModeArray(const RealModeArray&)>& omega_map = {});

} // namespace kamnf
