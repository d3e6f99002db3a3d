#include "doctest.h"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "kamnf/nls.hpp"
#include "support.hpp"

using namespace kamnf;
using namespace kamnf::testing;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Direct expansion of int f^{(d)}_k e^{ikx} |u|^{2(d+1)} dx/(2 pi) / (d+1) over all index tuples.
Hamiltonian tuple_expansion(const NonlinearitySpec& f, const ModeSet& modes, int cutoff)
{
    Hamiltonian h(modes, cutoff);
    std::vector<int> ms = modes.modes();
    for (const auto& [dk, c] : f.coeffs) {
        int n = dk.first + 1;
        if (2 * n > cutoff) continue;
        std::vector<int> idx(2 * n, 0);
        std::size_t total = 1;
        for (int i = 0; i < 2 * n; ++i) total *= ms.size();
        for (std::size_t code = 0; code < total; ++code) {
            std::size_t rest = code;
            MultiIndex a, b;
            long pa = 0, pb = 0;
            for (int i = 0; i < 2 * n; ++i) {
                int j = ms[rest % ms.size()];
                rest /= ms.size();
                if (i < n) {
                    a.add(j, 1);
                    pa += j;
                } else {
                    b.add(j, 1);
                    pb += j;
                }
            }
            if (dk.second + pa - pb != 0) continue;
            h.add_term(a, b, c / double(n));
        }
    }
    return h;
}

NonlinearitySpec harmonic_spec(double eps)
{
    NonlinearitySpec f;
    f.coeffs[{1, 0}] = 1.0;
    f.coeffs[{1, 1}] = cplx(eps, 0.3 * eps);
    f.coeffs[{1, -1}] = cplx(eps, -0.3 * eps);
    return f;
}

} // namespace

TEST_CASE("cubic nonlinearity on a single mode")
{
    ModeSet modes(0);
    Hamiltonian P = build_nls_perturbation(NonlinearitySpec::power(1), modes, 4);
    REQUIRE(P.size() == 1);
    CHECK(P.coeff(MultiIndex::unit(0, 2), MultiIndex::unit(0, 2)) == cplx(0.5, 0.0));
}

TEST_CASE("quintic model against tuple expansion")
{
    ModeSet modes(1);
    auto f = NonlinearitySpec::power(2);
    Hamiltonian P = build_nls_perturbation(f, modes, 6);
    Hamiltonian ref = tuple_expansion(f, modes, 6);
    CHECK(P.size() == ref.size());
    CHECK(relative_difference(P, ref) < 1e-15);
    for (const auto& t : P.terms()) {
        CHECK(t.key.alpha.mass() == 3);
        CHECK(t.key.beta.mass() == 3);
        CHECK(t.key.alpha.momentum() == t.key.beta.momentum());
    }
    CHECK(check_invariants(P).ok());
    CHECK_THROWS_AS(build_nls_perturbation(f, modes, 4), std::invalid_argument);
}

TEST_CASE("x-dependent nonlinearity carries momentum")
{
    ModeSet modes(2);
    auto f = harmonic_spec(0.01);
    CHECK_FALSE(f.translation_invariant());
    Hamiltonian P = build_nls_perturbation(f, modes, 4);
    Hamiltonian ref = tuple_expansion(f, modes, 4);
    CHECK(relative_difference(P, ref) < 1e-15);
    bool shifted = false;
    for (const auto& t : P.terms())
        if (t.key.alpha.momentum() - t.key.beta.momentum() == -1) shifted = true;
    CHECK(shifted);
    CHECK(check_invariants(P).ok());
    // the eta weight sees the momentum
    WeightParams w;
    w.r = 0.1;
    CHECK(norm(P, w.with(0.1, 1.0, 0.5)) > norm(P, w.with(0.1, 1.0, 0.0)));
}

TEST_CASE("translation covariance of the builder")
{
    ModeSet modes(2);
    auto f = harmonic_spec(0.02);
    const double c = 0.7;
    NonlinearitySpec g = f;
    for (auto& [dk, v] : g.coeffs) v *= std::polar(1.0, dk.second * c);
    Hamiltonian P = build_nls_perturbation(f, modes, 4);
    Hamiltonian Q = build_nls_perturbation(g, modes, 4);
    REQUIRE(P.size() == Q.size());
    for (std::size_t i = 0; i < P.size(); ++i) {
        const auto& t = P.terms()[i];
        long pi = t.key.alpha.momentum() - t.key.beta.momentum();
        cplx expect = t.coeff * std::polar(1.0, -double(pi) * c);
        CHECK(std::abs(Q.terms()[i].coeff - expect) < 1e-15);
    }
    WeightParams w;
    w = w.with(0.05, 1.0, 0.3);
    CHECK(norm(Q, w) == doctest::Approx(norm(P, w)).epsilon(1e-14));
}

TEST_CASE("nonlinearity validation and text round trip")
{
    NonlinearitySpec bad;
    bad.coeffs[{1, 1}] = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    NonlinearitySpec zero_degree;
    zero_degree.coeffs[{0, 0}] = 1.0;
    CHECK_THROWS_AS(zero_degree.validate(), std::invalid_argument);

    auto f = harmonic_spec(0.125);
    f.R = 2.0;
    std::stringstream ss;
    write_nonlinearity(ss, f);
    auto g = read_nonlinearity(ss);
    CHECK(g.coeffs == f.coeffs);
    CHECK(g.R == f.R);
    CHECK(g.a_strip == f.a_strip);
    // |f| = sum_d sup_k |f_k| e^{a|k|} R^d
    double expect = std::max(1.0, std::abs(cplx(0.125, 0.0375)) * std::exp(f.a_strip)) * 2.0;
    CHECK(f.norm() == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("regularity constants")
{
    CHECK(c_alg(2.0) == doctest::Approx(8.0 * (1.0 + kPi * kPi / 3.0)).epsilon(1e-14));
    for (double t : {0.3, 1.0, 2.0}) {
        double best = 0.0;
        for (int j = 0; j <= 2000; ++j)
            best = std::max(best, std::exp(-t * j + 1.0 * std::sqrt(japanese(j))) * std::pow(japanese(j), 2.0));
        CHECK(c_weight(2.0, 1.0, t, 0.5) == doctest::Approx(best).epsilon(1e-13));
    }
}

TEST_CASE("regularity bound on the quintic model")
{
    ModeSet modes(3);
    auto f = NonlinearitySpec::power(2);
    Hamiltonian P = build_nls_perturbation(f, modes, 6);
    WeightParams w;
    w.p = 2.0;
    w.s = 1.0;
    w.theta = 0.5;
    w.a = 0.0;
    w = w.with(0.01, 1.0, f.a_strip / 2.0);
    auto rep = verify_regularity_bound(P, f, w);
    CHECK(rep.holds);
    CHECK(rep.lhs > 0.0);
    CHECK(rep.lhs <= rep.rhs);

    auto half = verify_regularity_bound(P, f, w.with(0.005, w.s, w.eta));
    CHECK(half.lhs <= rep.lhs / 4.0);

    NonlinearitySpec zero;
    auto z = verify_regularity_bound(Hamiltonian(modes, 6), zero, w);
    CHECK(z.lhs == 0.0);
    CHECK(z.rhs == 0.0);
    CHECK_THROWS_AS(verify_regularity_bound(P, f, w.with(1.0, w.s, w.eta)), std::invalid_argument);
}

TEST_CASE("potential from the counter-term")
{
    ModeSet modes(2);
    std::mt19937_64 rng(4);
    RealModeArray xi(modes, 0.0);
    for (double& v : xi.values) v = uniform(rng, -0.5, 0.5);
    FrequencyVector omega = FrequencyVector::from_xi(xi);
    CounterTerm zero(modes);
    auto v0 = potential_from_counterterm(zero, omega);
    for (int j : modes.modes()) CHECK(v0[j] == doctest::Approx(xi[j]).epsilon(1e-15));

    CounterTerm lam(modes);
    for (double& v : lam.lambda.values) v = uniform(rng, -1e-3, 1e-3);
    auto vl = potential_from_counterterm(lam, FrequencyVector(modes));
    CHECK(vl.values == lam.lambda.values);

    // sum (j^2 + V_j)|u_j|^2 = D_omega + sum lambda_j |u_j|^2
    auto V = potential_from_counterterm(lam, omega);
    for (int j : modes.modes()) CHECK(std::fabs(double(j) * j + V[j] - omega.omega(j) - lam.lambda[j]) < 1e-14);
}

TEST_CASE("derived parameters and torus")
{
    auto f = NonlinearitySpec::power(2);
    NlsParams tp;
    tp.r = 0.01;
    KamConfig cfg = nls_kam_config(tp, f, KamConfig{});
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.r0 == doctest::Approx(2.0 * std::sqrt(2.0) * tp.r).epsilon(1e-15));
    CHECK(cfg.rho == doctest::Approx(cfg.r0 - 2.0 * tp.r).epsilon(1e-15));
    CHECK(cfg.s0 + cfg.sigma == doctest::Approx(tp.s).epsilon(1e-15));

    ModeSet modes(3);
    TorusData torus = nls_profile_torus(modes, tp, 2);
    CHECK(torus.actions[3] == 0.0);
    double sup = 0.0;
    WeightParams w = torus.weights;
    for (int j : modes.modes()) sup = std::max(sup, std::sqrt(torus.actions[j]) / u0_weight(j, 1.0, w));
    CHECK(sup == doctest::Approx(tp.r / 2.0).epsilon(1e-13));
    CHECK(std::isfinite(log_eps_star(cfg, f)));
    CHECK(log_eps_star(cfg, f) < 0.0);
}

TEST_CASE("zero nonlinearity gives the frequency shift as potential")
{
    ModeSet modes(2);
    NonlinearitySpec f;
    NlsParams tp;
    tp.r = 0.01;
    KamConfig base;
    base.degree_cutoff = 6;
    KamConfig cfg = nls_kam_config(tp, f, base);
    TorusData torus = nls_profile_torus(modes, tp, 1);
    FrequencyVector omega = sample_scheme_frequency(modes, cfg.gamma, 6, 2);
    auto res = run_potential_theorem(f, omega, torus, cfg, tp.r);
    CHECK(res.run.converged);
    CHECK(res.run.S.empty());
    for (int j : modes.modes()) CHECK(res.V[j] == doctest::Approx(omega.xi(j)).epsilon(1e-15));
    CHECK(res.run.N == diagonal_hamiltonian(omega, 6));
}

TEST_CASE("sampled frequency is Diophantine on the scheme divisors")
{
    ModeSet modes(2);
    auto om = sample_scheme_frequency(modes, 0.1, 6, 11);
    CHECK(om.in_cube());
    CHECK(is_diophantine(om, 0.1, scheme_divisors(modes, 6, 6)).ok);
    auto again = sample_scheme_frequency(modes, 0.1, 6, 11);
    CHECK(again.omega_array() == om.omega_array());
}
