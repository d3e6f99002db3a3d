#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kamnf/hamiltonian.hpp"

namespace kamnf {

// Integer vector ell with finite support, indexed by mode.
struct DivisorVector {
    std::array<int, kSlots> ell{};

    static DivisorVector from_pairs(std::initializer_list<std::pair<int, int>> pairs);
    static DivisorVector difference(const MultiIndex& alpha, const MultiIndex& beta);

    int operator[](int j) const { return ell[slot_of(j)]; }
    void set(int j, int v) { ell[slot_of(j)] = v; }
    int l1() const;
    long mass() const;       // sum_j ell_j
    long momentum() const;   // sum_j j ell_j
    bool zero() const { return l1() == 0; }
    // ell or -ell, whichever has its lowest-mode entry positive.
    DivisorVector canonical() const;
    std::string to_text() const;

    bool operator==(const DivisorVector&) const = default;
    auto operator<=>(const DivisorVector&) const = default;
};

// gamma prod_n 1/(1 + ell_n^2 <n>^2); throws for ell = 0.
double diophantine_threshold(const DivisorVector& ell, double gamma);
double log_diophantine_weight(const DivisorVector& ell);

// Nonzero ell on `modes` with |ell| <= L, one per sign pair, passing `keep`, in a fixed order.
std::vector<DivisorVector> enumerate_divisors(const std::vector<int>& modes, int L,
                                              const std::function<bool(const DivisorVector&)>& keep = {});

// Divisors alpha - beta occurring in the terms of h (alpha != beta), canonical and sorted.
std::vector<DivisorVector> occurring_divisors(const Hamiltonian& h);

// Packed divisor list for the scan kernel: coefficients are stored mode-major so that
// consecutive ell occupy consecutive lanes.
class DivisorTable {
public:
    DivisorTable(std::vector<int> modes, std::vector<DivisorVector> divisors);

    std::size_t size() const { return divisors_.size(); }
    const std::vector<int>& modes() const { return modes_; }
    const std::vector<DivisorVector>& divisors() const { return divisors_; }
    const double* coefficients(std::size_t mode_index) const { return coef_.data() + mode_index * size(); }
    // prod_n (1 + ell_n^2 <n>^2), the reciprocal of the threshold at gamma = 1.
    const double* inverse_weights() const { return inv_weight_.data(); }

private:
    std::vector<int> modes_;
    std::vector<DivisorVector> divisors_;
    std::vector<double> coef_;
    std::vector<double> inv_weight_;
};

enum class ScanKernel { Auto, Scalar, Avx2, Neon };

struct ScanResult {
    double min_ratio = 0.0;     // min over ell of |omega.ell| prod(1 + ell_n^2 <n>^2)
    std::size_t argmin = 0;
};

// omega_values[i] is omega at modes()[i]. Every kernel returns bit-identical results.
ScanResult divisor_scan(const DivisorTable& table, const double* omega_values, ScanKernel kernel = ScanKernel::Auto);
// Kernels usable on this machine, Scalar first.
std::vector<ScanKernel> available_scan_kernels();
const char* scan_kernel_name(ScanKernel k);

struct DiophantineCheck {
    bool ok = true;
    double worst_margin = 0.0;   // min |omega.ell| / threshold; +inf for an empty list
    DivisorVector witness;
};

DiophantineCheck is_diophantine(const FrequencyVector& omega, double gamma, const DivisorTable& table);
DiophantineCheck is_diophantine(const FrequencyVector& omega, double gamma, const std::vector<DivisorVector>& ells);

// Fraction of xi uniform in [-1/2,1/2]^{2 j_max + 1} failing the condition for all |ell| <= L.
double sample_measure(double gamma, int L, int j_max, long n_samples, uint64_t seed);

// Rejection-samples xi until omega = j^2 + xi passes on `table`; throws after max_tries.
FrequencyVector sample_diophantine_frequency(const ModeSet& modes, double gamma, const DivisorTable& table,
                                             uint64_t seed, int max_tries = 100000);

class HomologicalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kNearResonance = 1e-14;

// L_omega^{-1} F. Throws HomologicalError on an action term, on |omega.ell| < 1e-14, and, when
// gamma > 0, on a divisor failing the gamma-Diophantine bound.
Hamiltonian solve_homological(const Hamiltonian& f, const FrequencyVector& omega, double gamma = 0.0);

// (312/(sigma theta (1-theta)) ln(156/(sigma theta (1-theta))))^{2/theta}
double i_sharp(double sigma, double theta);
// -sigma (1-theta) x <i>^{theta/2} / 13 + ln(1 + x^2 <i>^2)
double smoothing_term(int i, double x, double sigma, double theta);
// sum_i f_i(|ell_i|, sigma)
double smoothing_budget(const DivisorVector& ell, double sigma, double theta);
// 21 i_sharp ln i_sharp
double smoothing_budget_bound(double sigma, double theta);
// ln of the constant in |L_omega^{-1} F|_{r,s+sigma,eta-sigma} <= gamma^{-1} e^{C} |F|_{r,s,eta}.
double homological_log_constant(double sigma, double theta);
// ln of the constant for the Lipschitz part: 63 i_sharp(sigma/3) ln i_sharp(sigma/3) + 2 ln gamma^{-1}.
double homological_lipschitz_log_constant(double sigma, double theta, double gamma);
// sum_i <i>^theta (alpha_i + beta_i) - 2 <j>^theta + |pi(alpha - beta)|
double smoothing_exponent(const MultiIndex& alpha, const MultiIndex& beta, int j, double theta);

struct Violation {
    std::string witness;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct VerifierReport {
    std::string name;
    long checked = 0;
    long violation_count = 0;
    std::vector<Violation> violations;   // the first kMaxStoredViolations witnesses
    bool ok() const { return violation_count == 0; }
    void record(const std::string& witness, double lhs, double rhs, bool holds);
    static constexpr std::size_t kMaxStoredViolations = 100;
};

std::string report_to_json(const VerifierReport& r);

// Small-divisor lemma: under |sum (alpha_i-beta_i) i^2| <= 10 |alpha-beta| the weighted
// difference is controlled by the smoothing exponent.
VerifierReport verify_small_divisor_lemma(double theta, int mass_max, int j_max);
// kappa^{2|m|} sum_{|delta|=q, delta<=m} binom(m,delta) <= c_kappa^q. `inject_fault` flips the inequality.
VerifierReport verify_binomial_sum_bound(double kappa2, int q_max, int m_mass_max, int j_max = 4, bool inject_fault = false);
// The smoothing exponent is nonnegative.
VerifierReport verify_smoothing_positivity(int mass_max, int j_max, double theta);
// Per-term homological chain at omega: e^{-sigma E}/|omega.ell| bounded by 1/9 away from
// (divisor) and by gamma^{-1} exp(sum f_i) under it.
VerifierReport verify_homological_chain(const Hamiltonian& f, const FrequencyVector& omega, double gamma,
                                        double sigma, double theta);

} // namespace kamnf
