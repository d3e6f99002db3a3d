#pragma once

#include <vector>

#include "kamnf/hamiltonian.hpp"

namespace kamnf {

// Removes part of a series and records the norm of what was dropped.
class Truncator {
public:
    virtual ~Truncator() = default;
    virtual Hamiltonian apply(const Hamiltonian& h) = 0;
    double residual() const { return residual_; }
    void reset() { residual_ = 0.0; }

protected:
    double residual_ = 0.0;
};

// Drops monomials of total degree above the cutoff.
class DegreeTruncator : public Truncator {
public:
    DegreeTruncator(int cutoff, WeightParams w) : cutoff_(cutoff), w_(w) {}
    Hamiltonian apply(const Hamiltonian& h) override;

private:
    int cutoff_;
    WeightParams w_;
};

// {F, G} = i sum_j (dF/d ubar_j dG/du_j - dF/du_j dG/d ubar_j), without truncation.
Hamiltonian poisson_bracket_full(const Hamiltonian& f, const Hamiltonian& g);
// Bracket cut back to max(cutoff(F), cutoff(G)); dropped norm goes to `trunc` when supplied.
Hamiltonian poisson_bracket(const Hamiltonian& f, const Hamiltonian& g, Truncator* trunc = nullptr);

// L_omega G = {D_omega, G}: multiplies each coefficient by i omega.(alpha - beta).
Hamiltonian apply_L_omega(const Hamiltonian& g, const FrequencyVector& omega);

// Precompiled i dH/d ubar for repeated evaluation.
class VectorField {
public:
    explicit VectorField(const Hamiltonian& h);

    StateVector operator()(const StateVector& u) const;
    // Directional derivative of the field at u along v.
    StateVector jvp(const StateVector& u, const StateVector& v) const;
    const ModeSet& modes() const { return modes_; }

private:
    struct Factor {
        uint8_t slot;
        uint8_t a;
        uint8_t b;
    };
    struct Entry {
        int target;
        cplx coeff;
        uint32_t first;
        uint32_t count;
    };
    void powers(const StateVector& u, std::vector<cplx>& pu, std::vector<cplx>& pb) const;

    ModeSet modes_;
    int max_exp_ = 0;
    std::vector<Entry> entries_;
    std::vector<Factor> factors_;
};

StateVector vector_field(const Hamiltonian& h, const StateVector& u);
cplx evaluate(const Hamiltonian& h, const StateVector& u);

struct LieOptions {
    int k_max = 0;                // 0 selects the default rule
    Truncator* trunc = nullptr;   // applied to every bracket
    WeightParams w;               // norm used for tail diagnostics
    double rho = 0.0;             // analyticity loss for the smallness check; 0 skips it
    double rel_tol = 1e-17;       // stop once a term is this small relative to the sum
};

struct LieResult {
    Hamiltonian value;
    int terms_used = 0;
    double last_term_norm = 0.0;
    double tail_estimate = 0.0;   // geometric extrapolation of the dropped tail
    double paper_tail_bound = -1; // 2|H|(|S|/2 delta)^k when the smallness condition holds, else -1
    bool smallness_ok = true;
};

// sum_k ad_S^k H / k!
LieResult lie_transform(const Hamiltonian& h, const Hamiltonian& s, const LieOptions& opt);
// H0 + sum_{k>=1} ad_S^{k-1} H1 / k!; with H1 = {S, H0} this is lie_transform(H0).
LieResult lie_series(const Hamiltonian& h0, const Hamiltonian& h1, const Hamiltonian& s, const LieOptions& opt);

// delta = rho / (16 e (r + rho)), the smallness threshold for |S|_{r+rho}.
double flow_smallness_threshold(double r, double rho);

// Time-1 flow of X_S by fixed-step RK4.
StateVector flow_point(const Hamiltonian& s, const StateVector& u, int steps);
StateVector flow_point(const VectorField& field, const StateVector& u, int steps, double time = 1.0);
// Same, also carrying tangent vectors through the exact derivative of the RK4 map.
StateVector flow_point_tangent(const VectorField& field, const StateVector& u, int steps,
                               std::vector<StateVector>& tangents, double time = 1.0);

} // namespace kamnf
