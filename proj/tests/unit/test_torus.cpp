#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "kamnf/torus.hpp"
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

// Random torus with |sqrt I|_{p,s,a} = ratio * r, nonzero on |j| <= support.
TorusData random_torus(std::mt19937_64& rng, const ModeSet& modes, double kappa, double ratio, int support)
{
    TorusData t;
    t.weights = default_weights();
    t.kappa = kappa;
    t.actions = RealModeArray(modes, 0.0);
    int top = modes.mode_at(0);
    for (int j : modes.modes()) {
        if (std::abs(j) > support) continue;
        if (modes.has_tangential() && !modes.is_tangential(j)) continue;
        double u = u0_weight(j, t.weights.r, t.weights) * ratio * uniform(rng, 0.3, 1.0);
        t.actions[j] = u * u;
        top = j;
    }
    double u = u0_weight(top, t.weights.r, t.weights) * ratio;
    t.actions[top] = u * u;
    return t;
}

Hamiltonian re_pair(const ModeSet& modes, int degree, const MultiIndex& a, const MultiIndex& b, double c)
{
    Hamiltonian h(modes, degree);
    h.add_real_pair(a, b, c);
    return h;
}

} // namespace

TEST_CASE("c_kappa branches")
{
    CHECK(c_kappa(0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c_kappa_from_square(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c_kappa_from_square(0.25) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c_kappa(std::sqrt(std::exp(-0.5))) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_THROWS(c_kappa(0.0));
    CHECK_THROWS(c_kappa(1.0));
}

TEST_CASE("torus validation and serialisation")
{
    std::mt19937_64 rng(1);
    ModeSet modes(3);
    TorusData t = random_torus(rng, modes, 0.5, 0.4, 2);
    CHECK_NOTHROW(t.validate());
    CHECK(t.radius_ratio() == doctest::Approx(0.4).epsilon(1e-12));
    TorusData tight = t;
    tight.kappa = 0.3;
    CHECK_THROWS(tight.validate());
    std::stringstream ss;
    write_torus(ss, t);
    TorusData back = read_torus(ss);
    CHECK(back.actions == t.actions);
    CHECK(back.kappa == t.kappa);
    CHECK(back.r() == t.r());

    TorusData split = random_torus(rng, ModeSet(3, {-1, 1}), 0.5, 0.4, 3);
    CHECK(split.action(0) == 0.0);
    CHECK_NOTHROW(split.validate());
    split.actions[2] = 1e-6;
    CHECK_THROWS(split.validate());
}

TEST_CASE("worked example of the degree decomposition")
{
    ModeSet modes(3);
    TorusData t;
    t.weights = default_weights();
    t.actions = RealModeArray(modes, 0.0);
    t.actions[1] = 0.013;
    t.actions[2] = 0.004;
    t.actions[3] = 0.0007;
    double I1 = t.actions[1], I2 = t.actions[2];
    // H = |u_1|^2 |u_2|^4 Re(u_1 conj u_3)
    MultiIndex m = MultiIndex::from_pairs({{1, 1}, {2, 2}});
    Hamiltonian h = re_pair(modes, 10, m + MultiIndex::unit(1), m + MultiIndex::unit(3), 0.5);
    Hamiltonian re13 = re_pair(modes, 10, MultiIndex::unit(1), MultiIndex::unit(3), 0.5);
    Hamiltonian m2 = project_degree(h, t, -2);
    CHECK(relative_difference(m2, I1 * I2 * I2 * re13) < 1e-13);
    Hamiltonian bracket_term = I2 * I2 * action(modes, 10, 1) + 2 * I1 * I2 * action(modes, 10, 2);
    Hamiltonian shift(modes, 10);
    shift.add_term(MultiIndex(), MultiIndex(), -(I2 * I2 * I1 + 2 * I1 * I2 * I2));
    Hamiltonian factor = bracket_term + shift;
    Hamiltonian expect0(modes, 10);
    for (const auto& a : factor.terms())
        for (const auto& b : re13.terms()) expect0.add_term(a.key.alpha + b.key.alpha, a.key.beta + b.key.beta, a.coeff * b.coeff);
    CHECK(relative_difference(project_degree(h, t, 0), expect0) < 1e-13);
    Hamiltonian rest = h - m2 - project_degree(h, t, 0);
    CHECK(relative_difference(project_degree_geq(h, t, 2), rest) < 1e-12);
}

TEST_CASE("zero torus keeps the disjoint-form mass")
{
    std::mt19937_64 rng(2);
    ModeSet modes(3);
    TorusData t;
    t.weights = default_weights();
    t.actions = RealModeArray(modes, 0.0);
    Hamiltonian h = random_hamiltonian(rng, modes, 8, 30);
    for (int q = 0; q <= 4; ++q) {
        Hamiltonian expect = project_index_set(h, [q](const MultiIndex& a, const MultiIndex& b) {
            return split_min(a, b).m.mass() == q;
        });
        CHECK(project_degree(h, t, 2 * q - 2) == expect);
    }
}

TEST_CASE("projection algebra on random instances")
{
    std::mt19937_64 rng(3);
    ModeSet modes(3);
    for (int n = 0; n < 100; ++n) {
        TorusData t = random_torus(rng, modes, 0.6, 0.5, uniform_int(rng, 0, 3));
        Hamiltonian h = random_hamiltonian(rng, modes, 8, 12);
        auto parts = degree_components(h, t);
        Hamiltonian total(modes, 8);
        for (auto& [d, p] : parts) total += p;
        CHECK(relative_difference(total, h) < 1e-12);
        for (int d = -2; d <= 6; d += 2) {
            Hamiltonian p = project_degree(h, t, d);
            CHECK(relative_difference(project_degree(p, t, d), p) < 1e-12);
            for (int e = -2; e <= 6; e += 2)
                if (e != d) CHECK(max_abs_coeff(project_degree(p, t, e)) <= 1e-12 * std::max(1e-300, max_abs_coeff(p)));
        }
    }
    CHECK_THROWS(project_degree(Hamiltonian(modes, 4), random_torus(rng, modes, 0.6, 0.5, 2), 1));
    CHECK_THROWS(project_degree(Hamiltonian(modes, 4), random_torus(rng, modes, 0.6, 0.5, 2), -4));
}

TEST_CASE("Bourgain representation agrees with the projection")
{
    std::mt19937_64 rng(4);
    ModeSet modes(3);
    for (int n = 0; n < 30; ++n) {
        TorusData t = random_torus(rng, modes, 0.6, 0.5, 3);
        Hamiltonian h = random_hamiltonian(rng, modes, 10, 10);
        CHECK(bourgain_representation(h, t, 0) == h);
        for (int q = 1; q <= 4; ++q) CHECK(bourgain_defect(h, t, q) < 1e-10);
    }
}

TEST_CASE("projection examples")
{
    std::mt19937_64 rng(5);
    ModeSet modes(3);
    TorusData t = random_torus(rng, modes, 0.6, 0.5, 3);
    const int N = 3;
    Hamiltonian poly = random_hamiltonian(rng, modes, 2 * N, 20);
    CHECK(max_abs_coeff(project_degree_geq(poly, t, 2 * N)) < 1e-15 * max_abs_coeff(poly));

    // (|u_1|^2 - I_1)^2 Re(u_1 conj u_2) has degree 2.
    Hamiltonian y = action(modes, 10, 1);
    y.add_term(MultiIndex(), MultiIndex(), -t.actions[1]);
    Hamiltonian base = re_pair(modes, 10, MultiIndex::unit(1), MultiIndex::unit(2), 0.5);
    Hamiltonian h = base;
    for (int k = 0; k < 2; ++k) {
        Hamiltonian next(modes, 10);
        for (const auto& a : y.terms())
            for (const auto& b : h.terms()) next.add_term(a.key.alpha + b.key.alpha, a.key.beta + b.key.beta, a.coeff * b.coeff);
        h = next;
    }
    CHECK(max_abs_coeff(project_degree_leq(h, t, 0)) < 1e-15 * max_abs_coeff(h));
    CHECK(relative_difference(project_degree(h, t, 2), h) < 1e-14);
}

TEST_CASE("counterterm extraction")
{
    std::mt19937_64 rng(6);
    ModeSet modes(2);
    TorusData t = random_torus(rng, modes, 0.6, 0.5, 2);
    CounterTerm lam(modes);
    lam.lambda[-1] = 0.4;
    lam.lambda[2] = -1.5;
    CounterTerm back = counterterm_extract(counterterm_hamiltonian(lam, t, 4), t);
    for (int j : modes.modes()) CHECK(back.lambda[j] == doctest::Approx(lam.lambda[j]).epsilon(1e-14));

    Hamiltonian quartic = re_pair(modes, 4, MultiIndex::unit(1, 2), MultiIndex::unit(1, 2), 1.0);
    CHECK(counterterm_extract(quartic, t).lambda[1] == doctest::Approx(2 * t.actions[1]).epsilon(1e-14));

    Hamiltonian off = re_pair(modes, 4, MultiIndex::unit(1), MultiIndex::unit(2), 1.0);
    CHECK(counterterm_extract(off, t).sup_norm() == 0.0);

    auto w = default_weights();
    for (int n = 0; n < 50; ++n) {
        Hamiltonian h = random_hamiltonian(rng, modes, 8, 12);
        CounterTerm c = counterterm_extract(h, t);
        Hamiltonian zeroK = select_centered(to_centered(h, t), 0u, [](int d, bool k) { return d == 0 && k; });
        Hamiltonian mono = from_centered(zeroK, t);
        CHECK(relative_difference(mono, counterterm_hamiltonian(c, t, 8)) < 1e-12);
        // norm of a counterterm equals its sup norm
        CHECK(norm(mono, w) == doctest::Approx(c.sup_norm()).epsilon(1e-12));
    }
}

TEST_CASE("affine extension of the projections")
{
    std::mt19937_64 rng(7);
    ModeSet modes(2);
    TorusData t = random_torus(rng, modes, 0.6, 0.5, 2);
    RealModeArray xi(modes, 0.0);
    for (auto& x : xi.values) x = uniform(rng, -0.5, 0.5);
    auto om = FrequencyVector::from_xi(xi);
    auto split = extend_projection_affine(om, t, 4);
    double dot = 0.0;
    for (int j : modes.modes()) dot += om.omega(j) * t.actions[j];
    CHECK(split.constant == doctest::Approx(dot).epsilon(1e-15));
    Hamiltonian d = diagonal_hamiltonian(om, 4);
    Hamiltonian c(modes, 4);
    c.add_term(MultiIndex(), MultiIndex(), split.constant);
    CHECK(relative_difference(split.zero_K + c, d) < 1e-15);

    TorusData zero = t;
    for (auto& x : zero.actions.values) x = 0.0;
    auto z = extend_projection_affine(om, zero, 4);
    CHECK(z.constant == 0.0);
    CHECK(relative_difference(z.zero_K, d) < 1e-15);

    auto none = extend_projection_affine(FrequencyVector::from_omega(RealModeArray(modes, 0.0)), t, 4);
    CHECK(none.constant == 0.0);
    CHECK(none.zero_K.empty());
}

TEST_CASE("degree laws of the bracket")
{
    std::mt19937_64 rng(8);
    ModeSet modes(3);
    RealModeArray xi(modes, 0.0);
    for (auto& x : xi.values) x = uniform(rng, -0.5, 0.5);
    auto om = FrequencyVector::from_xi(xi);
    Hamiltonian d = diagonal_hamiltonian(om, 8);
    for (int n = 0; n < 100; ++n) {
        TorusData t = random_torus(rng, modes, 0.6, 0.5, 3);
        Hamiltonian f = random_hamiltonian(rng, modes, 6, 6);
        Hamiltonian g = project_degree_geq(random_hamiltonian(rng, modes, 8, 6, false, 2), t, 2);
        Hamiltonian fg = poisson_bracket_full(f, g);
        double scale = max_abs_coeff(fg) + 1e-300;
        CHECK(max_abs_coeff(project_degree(fg, t, -2)) <= 1e-12 * scale);
        Hamiltonian f0 = project_degree_geq(f, t, 0);
        Hamiltonian f0g = poisson_bracket_full(f0, g);
        double s0 = max_abs_coeff(f0g) + 1e-300;
        CHECK(max_abs_coeff(project_degree(f0g, t, -2)) <= 1e-12 * s0);
        CHECK(max_abs_coeff(project_degree(f0g, t, 0)) <= 1e-12 * s0);
        for (int k = -2; k <= 4; k += 2) {
            Hamiltonian lhs = project_degree(poisson_bracket_full(d, f), t, k);
            Hamiltonian rhs = poisson_bracket_full(d, project_degree(f, t, k));
            CHECK(relative_difference(lhs, rhs, max_abs_coeff(poisson_bracket_full(d, f))) < 1e-12);
        }
    }
}

TEST_CASE("projection norm bounds")
{
    std::mt19937_64 rng(9);
    ModeSet modes(3);
    auto w = default_weights();
    for (int n = 0; n < 50; ++n) {
        double kappa = uniform(rng, 0.3, 0.9);
        TorusData t = random_torus(rng, modes, kappa, kappa, 3);
        Hamiltonian h = random_hamiltonian(rng, modes, 8, 10);
        double hn = norm(h, w);
        double ck = c_kappa(kappa);
        for (int q = 0; q <= 4; ++q) {
            double lhs = norm(project_degree(h, t, 2 * q - 2), w);
            CHECK(lhs <= std::pow((1 + 1 / (kappa * kappa)) * ck, q) * hn * (1 + 1e-12));
            double ks = uniform(rng, std::max(kappa, 0.5), 0.95);
            double tail = norm(project_degree_geq(h, t, 2 * q - 2), ks * w.r, w.s, w.eta, w);
            double bound = std::pow((kappa * kappa + ks * ks) / (ks * ks) * c_kappa(ks), q) * hn / (ks * ks);
            CHECK(tail <= bound * (1 + 1e-12));
        }
    }
}

TEST_CASE("vanishing on the torus")
{
    std::mt19937_64 rng(10);
    ModeSet modes(3);
    for (int n = 0; n < 20; ++n) {
        TorusData t = random_torus(rng, modes, 0.6, 0.5, 3);
        Hamiltonian h = random_hamiltonian(rng, modes, 8, 10);
        Hamiltonian h0 = project_degree_geq(h, t, 0);
        Hamiltonian h2 = project_degree_geq(h, t, 2);
        RealModeArray ang(modes, 0.0);
        for (auto& a : ang.values) a = uniform(rng, 0, 2 * M_PI);
        StateVector u = torus_point(t, ang);
        double scale = max_abs_coeff(h);
        CHECK(std::abs(evaluate(h0, u)) < 1e-9 * scale);
        CHECK(std::abs(evaluate(h2, u)) < 1e-9 * scale);
        for (auto v : vector_field(h2, u).values) CHECK(std::abs(v) < 1e-9 * scale);
    }
}

TEST_CASE("torus truncation commutes with the projections")
{
    std::mt19937_64 rng(11);
    ModeSet modes(3);
    auto w = default_weights();
    for (int n = 0; n < 30; ++n) {
        TorusData t = random_torus(rng, modes, 0.6, 0.5, uniform_int(rng, 1, 3));
        Hamiltonian f = random_hamiltonian(rng, modes, 6, 5);
        Hamiltonian g = project_degree_geq(random_hamiltonian(rng, modes, 6, 5, false, 2), t, 2);
        TorusTruncator tr(t, 6, w);
        Hamiltonian fg = tr.apply(poisson_bracket_full(f, g));
        CHECK(fg.max_degree() <= 6);
        double scale = max_abs_coeff(fg) + 1e-300;
        CHECK(max_abs_coeff(project_degree(fg, t, -2)) <= 1e-12 * scale);
        Hamiltonian big = random_hamiltonian(rng, modes, 10, 10);
        TorusTruncator tr2(t, 6, w);
        for (int d = -2; d <= 6; d += 2) {
            Hamiltonian a = project_degree(tr2.apply(big), t, d);
            Hamiltonian b = tr2.apply(project_degree(big, t, d));
            CHECK(relative_difference(a, b, max_abs_coeff(big)) < 1e-12);
        }
        CHECK(tr2.residual() > 0.0);
    }
}
