#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "kamnf/hamiltonian.hpp"
#include "kamnf/poisson.hpp"

namespace kamnf {

// Actions I_j of the torus T_I = {|u_j|^2 = I_j}; the mode set carries the tangential split, if any.
struct TorusData {
    RealModeArray actions;
    double kappa = 0.5;
    WeightParams weights;   // weights.r is the reference radius

    const ModeSet& modes() const { return actions.modes; }
    double r() const { return weights.r; }
    double action(int j) const { return actions.modes.contains(j) ? actions[j] : 0.0; }
    // True when no tangential split is configured.
    bool full() const { return !actions.modes.has_tangential(); }

    // |sqrt I|_{p,s,a} / r, the smallest admissible kappa.
    double radius_ratio() const;
    // Throws std::invalid_argument unless 0 < kappa < 1, I >= 0 and |sqrt I|_{p,s,a} <= kappa r.
    void validate() const;
};

// Torus with I_j = scale * u0_j(r)^2 on |j| <= support and 0 elsewhere.
TorusData make_profile_torus(const ModeSet& modes, const WeightParams& w, double scale, int support, double kappa);

// Point of T_I with the given angles.
StateVector torus_point(const TorusData& torus, const RealModeArray& angles);

void write_torus(std::ostream& os, const TorusData& torus);
TorusData read_torus(std::istream& is);

// 1/ln(kappa^-2) for 1/2 < kappa^2 < 1, and 2 kappa^2 otherwise.
double c_kappa(double kappa);
// Same quantity from kappa^2, so that the branch point kappa^2 = 1/2 is exact.
double c_kappa_from_square(double kappa2);

// Coefficients lambda_j of sum_j lambda_j (|u_j|^2 - I_j).
struct CounterTerm {
    RealModeArray lambda;

    CounterTerm() = default;
    explicit CounterTerm(const ModeSet& modes) : lambda(modes, 0.0) {}
    double sup_norm() const;
    CounterTerm& operator+=(const CounterTerm& o);
    CounterTerm& operator-=(const CounterTerm& o);
    CounterTerm& operator*=(double c);
};

CounterTerm operator+(CounterTerm a, const CounterTerm& b);
CounterTerm operator-(CounterTerm a, const CounterTerm& b);
CounterTerm operator*(double c, CounterTerm a);

Hamiltonian counterterm_hamiltonian(const CounterTerm& lambda, const TorusData& torus, int degree_cutoff);

// Torus-centred basis. A key (A, B) with split_min(A, B) = (delta, alpha, beta) stands for
// (|u|^2 - I)^delta u^alpha conj(u)^beta.
Hamiltonian to_centered(const Hamiltonian& h, const TorusData& torus);
Hamiltonian from_centered(const Hamiltonian& c, const TorusData& torus);

// Degree at the torus of a centred key: 2|delta| - 2 plus the exponents carried by normal modes.
int centered_degree(const MonomialKey& key, uint32_t normal_mask);
// Size used by the torus-compatible truncation: 2|delta| + |alpha| + |beta|.
int centered_size(const MonomialKey& key);

// All nonzero components H^(d), keyed by d.
std::map<int, Hamiltonian> degree_components(const Hamiltonian& h, const TorusData& torus);

// Keeps the centred terms whose (degree, is_action_term) pass the predicate.
template <class Pred>
Hamiltonian select_centered(const Hamiltonian& centred, uint32_t normal_mask, Pred&& keep)
{
    Hamiltonian out(centred.modes(), centred.degree_cutoff());
    std::vector<Term> kept;
    for (const auto& t : centred.terms())
        if (keep(centered_degree(t.key, normal_mask), t.key.alpha == t.key.beta)) kept.push_back(t);
    out.assign_terms(std::move(kept));
    return out;
}

// H^(d); throws std::invalid_argument for odd or < -2 d on a full torus, and for d < -2 otherwise.
Hamiltonian project_degree(const Hamiltonian& h, const TorusData& torus, int d);
Hamiltonian project_degree_geq(const Hamiltonian& h, const TorusData& torus, int d);
Hamiltonian project_degree_leq(const Hamiltonian& h, const TorusData& torus, int d);

// Pi^{>= 2q-2} H assembled from the direct representation coefficients
// q sum_{m >= delta+k} binom(m,delta) binom(m-delta,k) H_{m,alpha,beta} I^{m-delta-k} |k|!(|m|-|k|-1)!/|m|!.
Hamiltonian bourgain_representation(const Hamiltonian& h, const TorusData& torus, int q);
// Max coefficient difference between the two constructions of Pi^{>= 2q-2} H, relative to max |H|.
double bourgain_defect(const Hamiltonian& h, const TorusData& torus, int q);

// lambda_j = sum_{m != 0} H_{m,0,0} m_j I^{m-e_j}, the Pi^{0,K} coefficients.
CounterTerm counterterm_extract(const Hamiltonian& h, const TorusData& torus);

// D_omega = omega.I + sum_j omega_j (|u_j|^2 - I_j).
struct AffineSplit {
    double constant = 0.0;     // Pi^{-2,K} D_omega
    Hamiltonian zero_K;        // Pi^{0,K} D_omega
};
AffineSplit extend_projection_affine(const FrequencyVector& omega, const TorusData& torus, int degree_cutoff);

// Drops centred terms with 2|delta| + |alpha| + |beta| above the cutoff. Unlike plain
// degree truncation this commutes with every degree projection.
class TorusTruncator : public Truncator {
public:
    TorusTruncator(const TorusData& torus, int cutoff, WeightParams w)
        : torus_(torus), cutoff_(cutoff), w_(w)
    {
    }
    Hamiltonian apply(const Hamiltonian& h) override;
    void set_weights(const WeightParams& w) { w_ = w; }
    const WeightParams& weights() const { return w_; }
    int cutoff() const { return cutoff_; }

private:
    const TorusData& torus_;
    int cutoff_;
    WeightParams w_;
};

} // namespace kamnf
