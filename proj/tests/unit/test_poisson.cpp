#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "kamnf/poisson.hpp"
#include "support.hpp"

using namespace kamnf;
using namespace kamnf::testing;

namespace {

WeightParams default_weights()
{
    WeightParams w;
    w.r = 1.0;
    return w;
}

StateVector random_state(std::mt19937_64& rng, const ModeSet& modes, const WeightParams& w, double radius)
{
    StateVector u(modes, 0.0);
    for (int j : modes.modes()) {
        double a = uniform(rng, 0.0, 1.0) * u0_weight(j, radius, w);
        u[j] = std::polar(a, uniform(rng, 0.0, 2 * M_PI));
    }
    return u;
}

StateVector add(const StateVector& u, const StateVector& v, cplx c)
{
    StateVector out = u;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += c * v.values[i];
    return out;
}

double sup_diff(const StateVector& a, const StateVector& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

// Random monomial pair of low degree on |j| <= 2.
Hamiltonian random_monomial(std::mt19937_64& rng, const ModeSet& modes)
{
    Hamiltonian h(modes, 6);
    int half = uniform_int(rng, 1, 3);
    h.add_real_pair(random_index(rng, 2, half), random_index(rng, 2, half), cplx(uniform(rng, -1, 1), uniform(rng, -1, 1)));
    return h;
}

} // namespace

TEST_CASE("actions commute")
{
    ModeSet modes(3);
    for (int j = -3; j <= 3; ++j)
        for (int k = -3; k <= 3; ++k) CHECK(poisson_bracket(action(modes, 4, j), action(modes, 4, k)).empty());
}

TEST_CASE("bracket with D_omega is L_omega")
{
    std::mt19937_64 rng(41);
    ModeSet modes(3);
    RealModeArray xi(modes, 0.0);
    for (auto& x : xi.values) x = uniform(rng, -0.5, 0.5);
    auto om = FrequencyVector::from_xi(xi);
    Hamiltonian d = diagonal_hamiltonian(om, 8);
    for (int n = 0; n < 20; ++n) {
        Hamiltonian g = random_hamiltonian(rng, modes, 8, 10);
        Hamiltonian b = poisson_bracket(d, g);
        Hamiltonian expect(modes, 8);
        for (const auto& t : g.terms()) {
            double w = 0.0;
            for (int j : modes.modes()) w += om.omega(j) * (t.key.alpha[j] - t.key.beta[j]);
            expect.add_term(t.key.alpha, t.key.beta, cplx(0.0, w) * t.coeff);
        }
        CHECK(relative_difference(b, expect) < 1e-13);
        CHECK(relative_difference(apply_L_omega(g, om), expect) < 1e-13);
    }
}

TEST_CASE("bracket algebra")
{
    std::mt19937_64 rng(43);
    ModeSet modes(3);
    for (int n = 0; n < 30; ++n) {
        Hamiltonian f = random_hamiltonian(rng, modes, 6, 6, true);
        Hamiltonian g = random_hamiltonian(rng, modes, 6, 6, true);
        Hamiltonian h = random_hamiltonian(rng, modes, 4, 4, true);
        Hamiltonian fg = poisson_bracket_full(f, g);
        CHECK(relative_difference(fg, -1.0 * poisson_bracket_full(g, f)) < 1e-12);
        Hamiltonian lin = poisson_bracket_full(f, 2.0 * g + h);
        Hamiltonian sep = 2.0 * fg + poisson_bracket_full(f, h);
        CHECK(relative_difference(lin, sep) < 1e-12);
        auto inv = check_invariants(fg);
        CHECK(inv.real);
        CHECK(inv.mass_conserving);
        for (const auto& t : fg.terms()) CHECK(t.key.alpha.momentum() == t.key.beta.momentum());
        Hamiltonian jac = poisson_bracket_full(f, poisson_bracket_full(g, h)) +
                          poisson_bracket_full(g, poisson_bracket_full(h, f)) +
                          poisson_bracket_full(h, fg);
        double scale = std::max({max_abs_coeff(poisson_bracket_full(f, poisson_bracket_full(g, h))),
                                 max_abs_coeff(poisson_bracket_full(g, poisson_bracket_full(h, f))),
                                 max_abs_coeff(poisson_bracket_full(h, fg)), 1e-300});
        CHECK(max_abs_coeff(jac) / scale < 1e-12);
    }
}

TEST_CASE("bracket is the time derivative along the flow")
{
    std::mt19937_64 rng(47);
    ModeSet modes(2);
    auto w = default_weights();
    for (int n = 0; n < 10; ++n) {
        Hamiltonian h = random_hamiltonian(rng, modes, 6, 5);
        Hamiltonian g = random_hamiltonian(rng, modes, 6, 5);
        StateVector u = random_state(rng, modes, w, 1.0);
        StateVector x = vector_field(h, u);
        double eps = 1e-5;
        cplx fd = (evaluate(g, add(u, x, eps)) - evaluate(g, add(u, x, -eps))) / (2 * eps);
        cplx exact = evaluate(poisson_bracket_full(h, g), u);
        CHECK(std::abs(fd - exact) <= 1e-7 * (1.0 + std::abs(exact)));
    }
}

TEST_CASE("vector field conventions")
{
    ModeSet modes(2);
    StateVector u(modes, 0.0);
    u[1] = cplx(0.3, -0.2);
    u[-2] = cplx(0.1, 0.5);
    StateVector x = vector_field(action(modes, 4, 1), u);
    CHECK(std::abs(x[1] - cplx(0, 1) * u[1]) < 1e-16);
    CHECK(std::abs(x[-2]) == 0.0);
    StateVector z = vector_field(Hamiltonian(modes, 4), u);
    for (auto v : z.values) CHECK(v == cplx(0.0));
    Hamiltonian cubic(modes, 4);
    cubic.add_real_pair(MultiIndex::unit(1, 2), MultiIndex::from_pairs({{0, 1}, {2, 1}}), cplx(0.7, 0.1));
    StateVector zero(modes, 0.0);
    for (auto v : vector_field(cubic, zero).values) CHECK(v == cplx(0.0));
}

TEST_CASE("jvp matches finite differences")
{
    std::mt19937_64 rng(53);
    ModeSet modes(2);
    auto w = default_weights();
    Hamiltonian h = random_hamiltonian(rng, modes, 6, 8);
    VectorField field(h);
    StateVector u = random_state(rng, modes, w, 1.0);
    StateVector v = random_state(rng, modes, w, 1.0);
    double eps = 1e-6;
    StateVector fd = add(field(add(u, v, eps)), field(add(u, v, -eps)), -1.0);
    for (auto& x : fd.values) x /= 2 * eps;
    CHECK(sup_diff(fd, field.jvp(u, v)) < 1e-8);
}

TEST_CASE("bracket norm bound")
{
    std::mt19937_64 rng(59);
    ModeSet modes(2);
    auto w = default_weights();
    for (int n = 0; n < 50; ++n) {
        Hamiltonian f = random_monomial(rng, modes);
        Hamiltonian g = random_monomial(rng, modes);
        double r = uniform(rng, 0.2, 1.0), rho = uniform(rng, 0.05, 0.5);
        double lhs = norm(poisson_bracket_full(f, g), r, w.s, 0.0, w);
        double rhs = 8.0 * std::max(1.0, r / rho) * norm(f, r + rho, w.s, 0.0, w) * norm(g, r + rho, w.s, 0.0, w);
        CHECK(lhs <= rhs);
    }
}

TEST_CASE("Lie transform basics")
{
    std::mt19937_64 rng(61);
    ModeSet modes(2);
    auto w = default_weights();
    Hamiltonian h = random_hamiltonian(rng, modes, 6, 6);
    LieOptions opt;
    opt.w = w;
    CHECK(lie_transform(h, Hamiltonian(modes, 6), opt).value == h);

    RealModeArray xi(modes, 0.1);
    auto om = FrequencyVector::from_xi(xi);
    Hamiltonian d = diagonal_hamiltonian(om, 6);
    Hamiltonian s(modes, 2);
    s.add_real_pair(MultiIndex::unit(1), MultiIndex::unit(2), cplx(0.01, 0.02));
    opt.k_max = 1;
    auto one = lie_transform(d, s, opt);
    CHECK(relative_difference(one.value, d + poisson_bracket_full(s, d)) < 1e-15);
}

TEST_CASE("Lie transform bound under smallness")
{
    std::mt19937_64 rng(67);
    ModeSet modes(2);
    auto w = default_weights();
    int checked = 0;
    for (int n = 0; n < 50; ++n) {
        double r = uniform(rng, 0.3, 1.0), rho = uniform(rng, 0.1, 0.5);
        Hamiltonian h = random_hamiltonian(rng, modes, 6, 4);
        Hamiltonian s = random_hamiltonian(rng, modes, 4, 3);
        double delta = flow_smallness_threshold(r, rho);
        double sn = norm(s, r + rho, w.s, 0.0, w);
        s *= uniform(rng, 0.1, 1.0) * delta / sn;
        LieOptions opt;
        opt.w = w.with(r, w.s, 0.0);
        opt.rho = rho;
        auto res = lie_transform(h, s, opt);
        CHECK(res.smallness_ok);
        CHECK(norm(res.value, opt.w) <= 2.0 * norm(h, r + rho, w.s, 0.0, w));
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("flow of an action is a rotation")
{
    ModeSet modes(2);
    double lambda = 0.7;
    Hamiltonian s = lambda * action(modes, 2, 1);
    StateVector u(modes, 0.0);
    u[1] = cplx(0.2, 0.1);
    u[0] = cplx(-0.05, 0.3);
    StateVector out = flow_point(s, u, 100);
    CHECK(std::abs(out[1] - std::exp(cplx(0, lambda)) * u[1]) < 1e-10);
    CHECK(std::abs(out[0] - u[0]) == 0.0);
    CHECK(std::abs(std::abs(out[1]) - std::abs(u[1])) < 1e-12);
    CHECK(flow_point(Hamiltonian(modes, 2), u, 10) == u);
}

TEST_CASE("quadratic flows match the matrix exponential")
{
    std::mt19937_64 rng(71);
    ModeSet modes(2);
    const int n = modes.size();
    for (int rep = 0; rep < 10; ++rep) {
        // S = sum_{jk} A_{kj} u_j conj(u_k) with A Hermitian, so the flow is exp(iA).
        Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
        Hamiltonian s(modes, 2);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                cplx c = a == b ? cplx(uniform(rng, -1, 1), 0) : cplx(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
                A(b, a) = c;
                A(a, b) = std::conj(c);
                s.add_real_pair(MultiIndex::unit(modes.mode_at(a)), MultiIndex::unit(modes.mode_at(b)), c);
            }
        StateVector u = random_state(rng, modes, default_weights(), 1.0);
        Eigen::VectorXcd x(n);
        for (int a = 0; a < n; ++a) x(a) = u.values[a];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A);
        Eigen::VectorXcd ph = (es.eigenvalues().cast<cplx>() * cplx(0, 1)).array().exp();
        Eigen::VectorXcd exact = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint() * x;
        StateVector out = flow_point(s, u, 100);
        for (int a = 0; a < n; ++a) CHECK(std::abs(out.values[a] - exact(a)) < 1e-8);
    }
}

TEST_CASE("flow displacement bound")
{
    std::mt19937_64 rng(73);
    ModeSet modes(2);
    auto w = default_weights();
    for (int n = 0; n < 30; ++n) {
        double r = 0.5, rho = 0.25;
        Hamiltonian s = random_hamiltonian(rng, modes, 4, 4);
        s *= 0.5 * flow_smallness_threshold(r, rho) / norm(s, r + rho, w.s, 0.0, w);
        StateVector u = random_state(rng, modes, w, r);
        StateVector out = flow_point(s, u, 50);
        double disp = weighted_sup_norm(add(out, u, -1.0), w);
        CHECK(disp <= (r + rho) * norm(s, r + rho, w.s, 0.0, w));
    }
}

TEST_CASE("tangent flow matches finite differences")
{
    std::mt19937_64 rng(79);
    ModeSet modes(2);
    auto w = default_weights();
    Hamiltonian s = 0.05 * random_hamiltonian(rng, modes, 4, 4);
    VectorField field(s);
    StateVector u = random_state(rng, modes, w, 1.0);
    StateVector v = random_state(rng, modes, w, 1.0);
    std::vector<StateVector> tangents{v};
    flow_point_tangent(field, u, 40, tangents);
    double eps = 1e-6;
    StateVector fd = add(flow_point(field, add(u, v, eps), 40), flow_point(field, add(u, v, -eps), 40), -1.0);
    for (auto& x : fd.values) x /= 2 * eps;
    CHECK(sup_diff(fd, tangents[0]) < 1e-8);
}
