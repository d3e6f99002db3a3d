#pragma once

#include <complex>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "kamnf/indexing.hpp"

namespace kamnf {

using cplx = std::complex<double>;

// Parameters of the sequence space w^inf_{p,s,a} and of the norm |.|_{r,s,eta}.
struct WeightParams {
    double p = 2.0;
    double s = 1.0;
    double a = 0.0;
    double eta = 0.0;
    double theta = 0.5;
    double r = 1.0;

    void validate() const;
    WeightParams with(double r_, double s_, double eta_) const
    {
        WeightParams w = *this;
        w.r = r_;
        w.s = s_;
        w.eta = eta_;
        return w;
    }
};

// r <j>^{-p} exp(-a|j| - s <j>^theta)
double u0_weight(int j, double r, const WeightParams& w);
double log_u0_weight(int j, double r, const WeightParams& w);

// Dense per-mode storage over a ModeSet.
template <class T>
struct ModeArray {
    ModeSet modes;
    std::vector<T> values;

    ModeArray() = default;
    explicit ModeArray(ModeSet m, T fill = T{}) : modes(std::move(m)), values(modes.size(), fill) {}

    T& operator[](int j) { return values.at(modes.index(j)); }
    const T& operator[](int j) const { return values.at(modes.index(j)); }
    bool operator==(const ModeArray& o) const = default;
};

using RealModeArray = ModeArray<double>;
using StateVector = ModeArray<cplx>;

// sup_j |u_j| <j>^p e^{a|j| + s<j>^theta}
double weighted_sup_norm(const StateVector& u, const WeightParams& w);

// omega_j = j^2 + xi_j with |xi_j| <= 1/2.
class FrequencyVector {
public:
    FrequencyVector() = default;
    explicit FrequencyVector(ModeSet modes);
    static FrequencyVector from_xi(const RealModeArray& xi);
    static FrequencyVector from_omega(const RealModeArray& omega);

    const ModeSet& modes() const { return omega_.modes; }
    double omega(int j) const { return omega_[j]; }
    double xi(int j) const { return omega_[j] - double(j) * double(j); }
    void set_omega(int j, double w);
    const RealModeArray& omega_array() const { return omega_; }
    RealModeArray xi_array() const;
    // omega . (alpha - beta), summed in ascending slot order.
    double dot(const MultiIndex& alpha, const MultiIndex& beta) const;
    double sup_distance(const FrequencyVector& o) const;
    bool in_cube() const;

private:
    RealModeArray omega_;
    std::array<double, kSlots> by_slot_{};
};

struct Term {
    MonomialKey key;
    cplx coeff;
};

inline constexpr double kPruneThreshold = 1e-300;

// Sparse series sum H_{alpha,beta} u^alpha conj(u)^beta, terms sorted by key.
class Hamiltonian {
public:
    Hamiltonian() = default;
    Hamiltonian(ModeSet modes, int degree_cutoff);

    const ModeSet& modes() const { return modes_; }
    int degree_cutoff() const { return degree_cutoff_; }
    void set_degree_cutoff(int d) { degree_cutoff_ = d; }

    const std::vector<Term>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    int max_degree() const;

    cplx coeff(const MultiIndex& alpha, const MultiIndex& beta) const;

    // Adds c u^alpha conj(u)^beta, merging with any existing term.
    void add_term(const MultiIndex& alpha, const MultiIndex& beta, cplx c);
    // Adds c u^alpha conj(u)^beta + conj(c) u^beta conj(u)^alpha (Re c once when alpha == beta).
    void add_real_pair(const MultiIndex& alpha, const MultiIndex& beta, cplx c);

    // Replaces the term list; input may be unsorted and contain duplicates.
    void assign_terms(std::vector<Term> terms);

    Hamiltonian& operator+=(const Hamiltonian& o);
    Hamiltonian& operator-=(const Hamiltonian& o);
    Hamiltonian& operator*=(cplx c);
    Hamiltonian& add_scaled(const Hamiltonian& o, cplx c);

    bool operator==(const Hamiltonian& o) const;

private:
    ModeSet modes_;
    int degree_cutoff_ = 0;
    std::vector<Term> terms_;
};

Hamiltonian operator+(Hamiltonian a, const Hamiltonian& b);
Hamiltonian operator-(Hamiltonian a, const Hamiltonian& b);
Hamiltonian operator*(cplx c, Hamiltonian a);

// Hash accumulator used by operations that generate many terms.
class TermAccumulator {
public:
    explicit TermAccumulator(std::size_t reserve = 0);
    void add(const MonomialKey& key, cplx c);
    void add(const MultiIndex& alpha, const MultiIndex& beta, cplx c) { add(MonomialKey{alpha, beta}, c); }
    std::size_t size() const { return map_.size(); }
    Hamiltonian finish(const ModeSet& modes, int degree_cutoff);

private:
    std::unordered_map<MonomialKey, cplx, MonomialKeyHash> map_;
};

struct InvariantReport {
    bool real = true;
    bool mass_conserving = true;
    bool no_zero_terms = true;
    bool in_mode_set = true;
    bool within_cutoff = true;
    double reality_defect = 0.0;
    bool ok() const { return real && mass_conserving && no_zero_terms && in_mode_set && within_cutoff; }
};

InvariantReport check_invariants(const Hamiltonian& h, double reality_tol = 1e-12);

// Elementary Hamiltonians.
Hamiltonian action(const ModeSet& modes, int degree_cutoff, int j);
Hamiltonian diagonal_hamiltonian(const FrequencyVector& omega, int degree_cutoff);
// sum_j lambda_j (|u_j|^2 - I_j); the constant part is kept as the (0,0) term.
Hamiltonian counterterm_hamiltonian(const RealModeArray& lambda, const RealModeArray& actions, int degree_cutoff);
// (H + H^*)/2 where H^* swaps alpha, beta and conjugates.
Hamiltonian real_part(const Hamiltonian& h);

// sup_j sum |H| beta_j u0^{alpha+beta-2e_j} e^{eta |pi(alpha-beta)|}
double norm(const Hamiltonian& h, const WeightParams& w);
double norm(const Hamiltonian& h, double r, double s, double eta, const WeightParams& w);

Hamiltonian project_R(const Hamiltonian& h);
Hamiltonian project_K(const Hamiltonian& h);
Hamiltonian project_index_set(const Hamiltonian& h, const std::function<bool(const MultiIndex&, const MultiIndex&)>& keep);
Hamiltonian eta_majorant(const Hamiltonian& h, double eta);

// Keeps monomials of degree <= d; `dropped`, when given, receives the removed part.
Hamiltonian truncate_degree(const Hamiltonian& h, int d, Hamiltonian* dropped = nullptr);

struct LipschitzFamily {
    std::function<Hamiltonian(const FrequencyVector&)> eval;
    std::vector<FrequencyVector> samples;
};

// Sample estimator of sup norm + mu * Lipschitz seminorm; a lower bound of the true weighted norm.
double lipschitz_weighted_norm(const LipschitzFamily& f, double mu, const WeightParams& w);

// Text serialisation: header line, then one "ALPHA|BETA|RE|IM" line per term.
void write_hamiltonian(std::ostream& os, const Hamiltonian& h);
Hamiltonian read_hamiltonian(std::istream& is);
std::string format_double(double x);
double parse_double(std::string_view s);

} // namespace kamnf
