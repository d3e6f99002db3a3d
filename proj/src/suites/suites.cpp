#include "kamnf/suites.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kamnf/kam.hpp"
#include "kamnf/nls.hpp"
#include "kamnf/poisson.hpp"

namespace kamnf {

namespace {

double max_abs_coeff(const Hamiltonian& h)
{
    double m = 0.0;
    for (const auto& t : h.terms()) m = std::max(m, std::abs(t.coeff));
    return m;
}

// max |a - b| / max(|a|, |b|, floor)
double relative_difference(const Hamiltonian& a, const Hamiltonian& b, double floor = 1e-300)
{
    double scale = std::max({max_abs_coeff(a), max_abs_coeff(b), floor});
    return max_abs_coeff(a - b) / scale;
}

int uniform_int(Rng& rng, int lo, int hi)
{
    return lo + int(rng.next() % uint64_t(hi - lo + 1));
}

MultiIndex random_index(Rng& rng, int j_max, int mass)
{
    MultiIndex a;
    for (int i = 0; i < mass; ++i) a.add(uniform_int(rng, -j_max, j_max), 1);
    return a;
}

FrequencyVector random_shifted_frequency(Rng& rng, const ModeSet& modes)
{
    RealModeArray xi(modes, 0.0);
    for (double& v : xi.values) v = rng.uniform(-0.5, 0.5);
    return FrequencyVector::from_xi(xi);
}

std::string tag(int n)
{
    return "instance " + std::to_string(n);
}

WeightParams unit_weights()
{
    WeightParams w;
    w.r = 1.0;
    return w;
}

} // namespace

Hamiltonian random_real_hamiltonian(Rng& rng, const ModeSet& modes, int max_degree, int n_pairs,
                                    bool momentum_preserving, int min_half_degree)
{
    Hamiltonian h(modes, max_degree);
    int j_max = modes.j_max();
    for (int n = 0; n < n_pairs; ++n) {
        int half = uniform_int(rng, min_half_degree, max_degree / 2);
        MultiIndex a = random_index(rng, j_max, half);
        MultiIndex b = random_index(rng, j_max, half);
        if (momentum_preserving) {
            for (int tries = 0; tries < 200 && a.momentum() != b.momentum(); ++tries) b = random_index(rng, j_max, half);
            if (a.momentum() != b.momentum()) b = a;
        }
        double re = rng.uniform(-1.0, 1.0);
        double im = rng.uniform(-1.0, 1.0);
        h.add_real_pair(a, b, cplx(re, im));
    }
    return h;
}

TorusData random_profile_torus(Rng& rng, const ModeSet& modes, double kappa, double ratio, int support)
{
    TorusData t;
    t.weights = unit_weights();
    t.kappa = kappa;
    t.actions = RealModeArray(modes, 0.0);
    int top = modes.mode_at(0);
    for (int j : modes.modes()) {
        if (std::abs(j) > support) continue;
        if (modes.has_tangential() && !modes.is_tangential(j)) continue;
        double u = u0_weight(j, t.weights.r, t.weights) * ratio * rng.uniform(0.3, 1.0);
        t.actions[j] = u * u;
        top = j;
    }
    double u = u0_weight(top, t.weights.r, t.weights) * ratio;
    t.actions[top] = u * u;
    return t;
}

std::vector<VerifierReport> algebra_suite(uint64_t seed, int instances, double tol)
{
    Rng rng(seed);
    ModeSet modes(3);
    std::vector<VerifierReport> out;

    {
        VerifierReport rep;
        rep.name = "projection_algebra";
        for (int n = 0; n < instances; ++n) {
            TorusData t = random_profile_torus(rng, modes, 0.6, 0.5, uniform_int(rng, 0, 3));
            Hamiltonian h = random_real_hamiltonian(rng, modes, 8, 12);
            Hamiltonian total(modes, 8);
            for (auto& [d, p] : degree_components(h, t)) total += p;
            rep.record(tag(n) + " completeness", relative_difference(total, h), tol, relative_difference(total, h) <= tol);
            double worst_idem = 0.0, worst_orth = 0.0;
            for (int d = -2; d <= 6; d += 2) {
                Hamiltonian p = project_degree(h, t, d);
                worst_idem = std::max(worst_idem, relative_difference(project_degree(p, t, d), p));
                double scale = std::max(1e-300, max_abs_coeff(p));
                for (int e = -2; e <= 6; e += 2)
                    if (e != d) worst_orth = std::max(worst_orth, max_abs_coeff(project_degree(p, t, e)) / scale);
            }
            rep.record(tag(n) + " idempotence", worst_idem, tol, worst_idem <= tol);
            rep.record(tag(n) + " orthogonality", worst_orth, tol, worst_orth <= tol);
        }
        out.push_back(rep);
    }

    {
        VerifierReport rep;
        rep.name = "range_kernel_split";
        for (int n = 0; n < instances; ++n) {
            Hamiltonian h = random_real_hamiltonian(rng, modes, 8, 12);
            for (int k = 0; k < 3; ++k) {
                MultiIndex a = random_index(rng, 3, uniform_int(rng, 1, 4));
                h.add_term(a, a, rng.uniform(-1.0, 1.0));
            }
            Hamiltonian r = project_R(h), k = project_K(h);
            double defect = std::max({relative_difference(r + k, h), relative_difference(project_R(r), r),
                                      relative_difference(project_K(k), k),
                                      max_abs_coeff(project_K(r)) / std::max(1e-300, max_abs_coeff(h)),
                                      max_abs_coeff(project_R(k)) / std::max(1e-300, max_abs_coeff(h))});
            rep.record(tag(n), defect, tol, defect <= tol);
        }
        out.push_back(rep);
    }

    {
        VerifierReport minus_two, zero_law, homo;
        minus_two.name = "degree_law_minus_two";
        zero_law.name = "degree_law_zero";
        homo.name = "degree_law_L_omega";
        FrequencyVector om = random_shifted_frequency(rng, modes);
        Hamiltonian d = diagonal_hamiltonian(om, 8);
        for (int n = 0; n < instances; ++n) {
            TorusData t = random_profile_torus(rng, modes, 0.6, 0.5, 3);
            Hamiltonian f = random_real_hamiltonian(rng, modes, 6, 6);
            Hamiltonian g = project_degree_geq(random_real_hamiltonian(rng, modes, 8, 6, false, 2), t, 2);
            Hamiltonian fg = poisson_bracket_full(f, g);
            double m = max_abs_coeff(project_degree(fg, t, -2)) / (max_abs_coeff(fg) + 1e-300);
            minus_two.record(tag(n), m, tol, m <= tol);
            Hamiltonian f0g = poisson_bracket_full(project_degree_geq(f, t, 0), g);
            double s0 = max_abs_coeff(f0g) + 1e-300;
            double sc = std::max(max_abs_coeff(project_degree(f0g, t, -2)), max_abs_coeff(project_degree(f0g, t, 0))) / s0;
            zero_law.record(tag(n), sc, tol, sc <= tol);
            Hamiltonian df = poisson_bracket_full(d, f);
            double worst = 0.0;
            for (int k = -2; k <= 4; k += 2)
                worst = std::max(worst, relative_difference(project_degree(df, t, k),
                                                            poisson_bracket_full(d, project_degree(f, t, k)),
                                                            max_abs_coeff(df)));
            homo.record(tag(n), worst, tol, worst <= tol);
        }
        out.push_back(minus_two);
        out.push_back(zero_law);
        out.push_back(homo);
    }

    {
        VerifierReport rep;
        rep.name = "homological_round_trip";
        for (int n = 0; n < instances; ++n) {
            FrequencyVector om = random_shifted_frequency(rng, modes);
            Hamiltonian f = project_R(random_real_hamiltonian(rng, modes, 8, 12));
            Hamiltonian back = apply_L_omega(solve_homological(f, om), om);
            double defect = relative_difference(back, f);
            rep.record(tag(n), defect, tol, defect <= tol);
        }
        out.push_back(rep);
    }

    {
        VerifierReport rep;
        rep.name = "counterterm_norm_identity";
        ModeSet small(2);
        WeightParams w = unit_weights();
        for (int n = 0; n < instances; ++n) {
            TorusData t = random_profile_torus(rng, small, 0.6, 0.5, 2);
            Hamiltonian h = random_real_hamiltonian(rng, small, 8, 12);
            CounterTerm c = counterterm_extract(h, t);
            Hamiltonian zeroK = from_centered(select_centered(to_centered(h, t), 0u, [](int d, bool k) { return d == 0 && k; }), t);
            double rebuild = relative_difference(zeroK, counterterm_hamiltonian(c, t, 8));
            double nz = norm(zeroK, w), sup = c.sup_norm();
            double defect = std::max(rebuild, std::fabs(nz - sup) / std::max(sup, 1e-300));
            rep.record(tag(n), defect, tol, defect <= tol);
        }
        out.push_back(rep);
    }

    {
        VerifierReport rep;
        rep.name = "split_merge_bijection";
        for (int n = 0; n < instances; ++n) {
            MultiIndex a = random_index(rng, 4, uniform_int(rng, 0, 6));
            MultiIndex b = random_index(rng, 4, uniform_int(rng, 0, 6));
            DisjointForm s = split_min(a, b);
            auto [a2, b2] = merge(s.m, s.alpha, s.beta);
            bool disjoint = (s.alpha.support_mask() & s.beta.support_mask()) == 0;
            DisjointForm again = split_min(a2, b2);
            bool ok = a2 == a && b2 == b && disjoint && again.m == s.m && again.alpha == s.alpha && again.beta == s.beta;
            rep.record(tag(n) + " " + a.to_text() + "|" + b.to_text(), ok ? 0.0 : 1.0, 0.0, ok);
        }
        out.push_back(rep);
    }
    return out;
}

std::vector<VerifierReport> inequality_suite(uint64_t seed, int instances)
{
    Rng rng(seed);
    std::vector<VerifierReport> out;
    WeightParams w = unit_weights();

    {
        VerifierReport rep;
        rep.name = "bracket_bound";
        ModeSet modes(2);
        for (int n = 0; n < instances; ++n) {
            Hamiltonian f(modes, 6), g(modes, 6);
            for (Hamiltonian* h : {&f, &g}) {
                int half = uniform_int(rng, 1, 3);
                MultiIndex a = random_index(rng, 2, half), b = random_index(rng, 2, half);
                double re = rng.uniform(-1.0, 1.0);
                double im = rng.uniform(-1.0, 1.0);
                h->add_real_pair(a, b, cplx(re, im));
            }
            double r = rng.uniform(0.2, 1.0), rho = rng.uniform(0.05, 0.5);
            double lhs = norm(poisson_bracket_full(f, g), r, w.s, 0.0, w);
            double rhs = 8.0 * std::max(1.0, r / rho) * norm(f, r + rho, w.s, 0.0, w) * norm(g, r + rho, w.s, 0.0, w);
            rep.record(tag(n), lhs, rhs, lhs <= rhs);
        }
        out.push_back(rep);
    }

    {
        VerifierReport rep;
        rep.name = "lie_transform_bound";
        ModeSet modes(2);
        for (int n = 0; n < instances; ++n) {
            double r = rng.uniform(0.3, 1.0), rho = rng.uniform(0.1, 0.5);
            Hamiltonian h = random_real_hamiltonian(rng, modes, 6, 4);
            Hamiltonian s = random_real_hamiltonian(rng, modes, 4, 3);
            double delta = flow_smallness_threshold(r, rho);
            s *= rng.uniform(0.1, 1.0) * delta / norm(s, r + rho, w.s, 0.0, w);
            LieOptions opt;
            opt.w = w.with(r, w.s, 0.0);
            opt.rho = rho;
            auto res = lie_transform(h, s, opt);
            double lhs = norm(res.value, opt.w), rhs = 2.0 * norm(h, r + rho, w.s, 0.0, w);
            rep.record(tag(n), lhs, rhs, res.smallness_ok && lhs <= rhs);
        }
        out.push_back(rep);
    }

    {
        VerifierReport proj, tail;
        proj.name = "projection_bound";
        tail.name = "projection_tail_bound";
        ModeSet modes(3);
        for (int n = 0; n < instances; ++n) {
            double kappa = rng.uniform(0.3, 0.9);
            TorusData t = random_profile_torus(rng, modes, kappa, kappa, 3);
            Hamiltonian h = random_real_hamiltonian(rng, modes, 8, 10);
            double hn = norm(h, w);
            double ck = c_kappa(kappa);
            for (int q = 0; q <= 4; ++q) {
                std::string wit = tag(n) + " q=" + std::to_string(q);
                double lhs = norm(project_degree(h, t, 2 * q - 2), w);
                double rhs = std::pow((1 + 1 / (kappa * kappa)) * ck, q) * hn;
                proj.record(wit, lhs, rhs, lhs <= rhs * (1 + 1e-12));
                double ks = rng.uniform(std::max(kappa, 0.5), 0.95);
                double tl = norm(project_degree_geq(h, t, 2 * q - 2), ks * w.r, w.s, w.eta, w);
                double bound = std::pow((kappa * kappa + ks * ks) / (ks * ks) * c_kappa(ks), q) * hn / (ks * ks);
                tail.record(wit, tl, bound, tl <= bound * (1 + 1e-12));
            }
        }
        out.push_back(proj);
        out.push_back(tail);
    }

    {
        VerifierReport rep;
        rep.name = "smoothing";
        ModeSet modes(3);
        for (int n = 0; n < instances; ++n) {
            Hamiltonian h = random_real_hamiltonian(rng, modes, 8, 10);
            double r = rng.uniform(0.2, 1.0), s = rng.uniform(0.2, 2.0), eta = rng.uniform(0.1, 2.0);
            double sigma = rng.uniform(0.0, 1.0) * eta;
            double lhs = norm(h, r, s + sigma, eta - sigma, w);
            double rhs = norm(h, r, s, eta, w);
            rep.record(tag(n), lhs, rhs, lhs <= rhs * (1 + 1e-12));
        }
        out.push_back(rep);
    }

    {
        VerifierReport rep;
        rep.name = "homological_bound";
        ModeSet modes(3);
        const double gamma = 0.05, theta = 0.5;
        int n = 0;
        while (n < instances) {
            Hamiltonian f = project_R(random_real_hamiltonian(rng, modes, 6, 10, true));
            if (f.empty()) continue;
            DivisorTable table(modes.modes(), occurring_divisors(f));
            FrequencyVector om = sample_diophantine_frequency(modes, gamma, table, rng.next());
            double sigma = rng.uniform(0.1, 1.0);
            bool chain = verify_homological_chain(f, om, gamma, sigma, theta).ok();
            Hamiltonian g = solve_homological(f, om, gamma);
            WeightParams wn = w;
            wn.eta = 1.5;
            double lhs = std::log(norm(g, wn.r, wn.s + sigma, wn.eta - sigma, wn));
            double rhs = std::log(norm(f, wn.r, wn.s, wn.eta, wn)) + homological_log_constant(sigma, theta) - std::log(gamma);
            rep.record(tag(n) + " (log)", lhs, rhs, chain && lhs <= rhs);
            ++n;
        }
        out.push_back(rep);
    }

    {
        VerifierReport rep;
        rep.name = "counterterm_bound";
        ModeSet modes(1);
        KamConfig cfg;
        cfg.degree_cutoff = 6;
        cfg.gamma = 0.1;
        double log_K = log_frak_K(cfg);
        DivisorTable table(modes.modes(), scheme_divisors(modes, 6, 6));
        for (int n = 0; n < instances; ++n) {
            TorusData t;
            t.weights = unit_weights();
            t.kappa = 0.5;
            t.actions = RealModeArray(modes, 0.0);
            for (double& v : t.actions.values) v = rng.uniform(0.005, 0.02);
            Hamiltonian g0 = cplx(rng.uniform(1e-5, 1e-3), 0.0) * random_real_hamiltonian(rng, modes, 6, 8, true);
            FrequencyVector om = sample_diophantine_frequency(modes, cfg.gamma, table, rng.next());
            KamState st = initial_state(g0, t, cfg);
            auto step = kam_step(st, om, t, cfg);
            double lhs = std::log(step.diag.lambda_bar_sup + 1e-300);
            double rhs = std::log(cfg.gamma) + log_K + std::log(step.diag.eps) + std::log1p(st.theta);
            rep.record(tag(n) + " (log)", lhs, rhs, lhs <= rhs);
        }
        out.push_back(rep);
    }

    {
        VerifierReport rep;
        rep.name = "nls_regularity";
        ModeSet modes(3);
        for (int n = 0; n < instances; ++n) {
            NonlinearitySpec f;
            int top = uniform_int(rng, 1, 2);
            for (int d = 1; d <= top; ++d) {
                f.coeffs[{d, 0}] = rng.uniform(-1.0, 1.0);
                for (int k = 1; k <= 2; ++k) {
                    if (rng.uniform() < 0.5) continue;
                    double re = rng.uniform(-0.1, 0.1);
                    double im = rng.uniform(-0.1, 0.1);
                    f.coeffs[{d, k}] = cplx(re, im);
                    f.coeffs[{d, -k}] = cplx(re, -im);
                }
            }
            f.R = rng.uniform(0.5, 2.0);
            Hamiltonian p = build_nls_perturbation(f, modes, 2 * top + 2);
            double r_max = std::sqrt(f.R) / c_alg(2.0);
            WeightParams wr = w.with(rng.uniform(0.01, 1.0) * r_max, rng.uniform(0.5, 1.5), rng.uniform(0.0, 0.9) * f.a_strip);
            auto reg = verify_regularity_bound(p, f, wr);
            rep.record(tag(n), reg.lhs, reg.rhs, reg.holds);
        }
        out.push_back(rep);
    }
    return out;
}

std::vector<VerifierReport> lemma_verifiers(const LemmaRanges& ranges, bool inject_fault)
{
    std::vector<VerifierReport> out;
    for (std::size_t i = 0; i < ranges.kappa2.size(); ++i) {
        auto rep = verify_binomial_sum_bound(ranges.kappa2[i], ranges.binomial_q_max, ranges.binomial_mass_max, ranges.binomial_j_max,
                                  inject_fault && i == 0);
        rep.name += " kappa2=" + format_double(ranges.kappa2[i]);
        out.push_back(rep);
    }
    for (double theta : ranges.thetas) {
        auto rep = verify_smoothing_positivity(ranges.smoothing_mass_max, ranges.smoothing_j_max, theta);
        rep.name += " theta=" + format_double(theta);
        out.push_back(rep);
    }
    for (double theta : ranges.thetas) {
        auto rep = verify_small_divisor_lemma(theta, ranges.divisor_mass_max, ranges.divisor_j_max);
        rep.name += " theta=" + format_double(theta);
        out.push_back(rep);
    }
    return out;
}

MeasureFit fit_measure_line(const std::vector<double>& gammas, const std::vector<double>& fractions, long n_samples)
{
    if (gammas.size() != fractions.size() || gammas.size() < 2 || n_samples <= 0)
        throw std::invalid_argument("measure fit needs at least two (gamma, fraction) rows and n_samples > 0");
    double n = double(gammas.size()), mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        mx += gammas[i] / n;
        my += fractions[i] / n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        sxx += (gammas[i] - mx) * (gammas[i] - mx);
        sxy += (gammas[i] - mx) * (fractions[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("measure fit needs distinct gammas");
    MeasureFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double var = 0.0;
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        double c = 1.0 / n - mx * (gammas[i] - mx) / sxx;
        double p = fractions[i];
        var += c * c * p * (1.0 - p) / double(n_samples);
        if (gammas[i] > 0.0) fit.max_ratio = std::max(fit.max_ratio, p / gammas[i]);
    }
    fit.intercept_stderr = std::sqrt(var);
    return fit;
}

} // namespace kamnf
