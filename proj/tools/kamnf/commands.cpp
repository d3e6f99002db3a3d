#include "commands.hpp"

#include <cmath>
#include <sstream>

#include "kamnf/dynamics.hpp"
#include "kamnf/kam.hpp"
#include "kamnf/nls.hpp"
#include "kamnf/random.hpp"
#include "kamnf/suites.hpp"

namespace kamnf::cli {

using nlohmann::json;

namespace {

json finite_or_null(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

json values_json(const RealModeArray& a, const std::vector<int>& which)
{
    json out = json::array();
    for (int j : which) out.push_back(finite_or_null(a[j]));
    return out;
}

std::vector<int> normal_modes(const ModeSet& modes)
{
    std::vector<int> out;
    for (int j : modes.modes())
        if (!modes.is_tangential(j)) out.push_back(j);
    return out;
}

NonlinearitySpec nonlinearity_from(const KamRunSettings& k)
{
    NonlinearitySpec f;
    if (k.coeffs.empty()) {
        f = NonlinearitySpec::power(k.power);
    } else {
        for (const auto& row : k.coeffs) f.coeffs[{int(row[0]), int(row[1])}] += cplx(row[2], row[3]);
    }
    f.a_strip = k.a_strip;
    f.R = k.R;
    try {
        f.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("nonlinearity: ") + e.what());
    }
    return f;
}

CsvTable steps_table(const std::vector<StepDiagnostics>& steps)
{
    CsvTable t({"n", "eps", "theta", "eps_next", "theta_next", "lambda_bar_sup", "m_norm", "neumann_iterations",
                "neumann_residual", "homological_residual", "s_norm", "column_increment", "column_dropped",
                "trunc_residual", "lie_terms"});
    for (const auto& s : steps)
        t.add_row({std::to_string(s.n), num(s.eps), num(s.theta), num(s.eps_next), num(s.theta_next),
                   num(s.lambda_bar_sup), num(s.m_norm), std::to_string(s.neumann_iterations), num(s.neumann_residual),
                   num(s.homological_residual), num(s.s_norm), num(s.column_increment), num(s.column_dropped),
                   num(s.trunc_residual), std::to_string(s.lie_terms)});
    return t;
}

struct KamSetup {
    NonlinearitySpec f;
    ModeSet modes;
    NlsParams tp;
    KamConfig cfg;
    TorusData torus;
    Hamiltonian P;
};

KamSetup kam_setup(const KamRunSettings& k)
{
    KamSetup s;
    s.f = nonlinearity_from(k);
    s.modes = k.tangential.empty() ? ModeSet(k.j_max) : ModeSet(k.j_max, k.tangential);
    s.tp.s = k.s;
    s.tp.a = k.a;
    s.tp.p = k.p;
    s.tp.theta = k.theta;
    KamConfig base;
    base.degree_cutoff = k.degree_cutoff;
    base.gamma = k.gamma;
    base.eps_target = k.eps_target;
    base.max_steps = k.max_steps;
    int support = k.support < 0 ? k.j_max : k.support;
    try {
        s.P = build_nls_perturbation(s.f, s.modes, k.degree_cutoff);
        s.tp.r = k.r;
        if (s.tp.r == 0.0) {
            s.tp.r = 1.0;
            KamConfig unit = nls_kam_config(s.tp, s.f, base);
            TorusData t = nls_profile_torus(s.modes, s.tp, support);
            double e1 = smallness(s.P, t, unit.at(unit.r0, unit.s0, unit.eta0), unit.gamma).eps;
            s.tp.r = e1 > 0.0 ? std::pow(k.eps0 / e1, 0.25) : 0.01;
        }
        s.cfg = nls_kam_config(s.tp, s.f, base);
        s.cfg.validate();
        s.torus = nls_profile_torus(s.modes, s.tp, support);
        s.torus.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

CommandResult kam_full(const ExperimentConfig& c, const KamSetup& s, const std::string& version)
{
    const KamRunSettings& k = c.kam;
    Rng root(c.seed);
    uint64_t omega_seed = root.split();
    uint64_t invariance_seed = root.split();
    FrequencyVector omega;
    if (!k.xi.empty()) {
        RealModeArray xi(s.modes, 0.0);
        for (int j : s.modes.modes()) xi[j] = k.xi[std::size_t(j + k.j_max)];
        omega = FrequencyVector::from_xi(xi);
    } else {
        omega = sample_scheme_frequency(s.modes, s.cfg.gamma, s.cfg.degree_cutoff, omega_seed);
    }

    PotentialResult res;
    std::string failure;
    try {
        res = run_potential_theorem(s.f, omega, s.torus, s.cfg, s.tp.r);
        failure = res.run.failure;
    } catch (const KamError& e) {
        failure = e.what();
        res.run.converged = false;
    }
    const KamRunResult& run = res.run;
    auto fit = fit_quadratic_constant(run.steps);

    json inv = nullptr;
    if (run.converged && k.invariance_points > 0) {
        Hamiltonian h = diagonal_hamiltonian(omega, s.cfg.degree_cutoff) + s.P;
        auto lim = schedule_limit(s.cfg);
        WeightParams w = s.cfg.at(lim.r, lim.s, lim.eta);
        auto rep = check_invariance(h, run.Lambda, run.S, omega, s.torus, k.invariance_points, invariance_seed,
                                    s.cfg.flow_steps, w);
        auto base = check_invariance(h, CounterTerm(s.modes), {}, omega, s.torus, k.invariance_points, invariance_seed,
                                     s.cfg.flow_steps, w);
        inv = json{{"points", rep.points}, {"max_defect", rep.max_defect}, {"untransformed_max_defect", base.max_defect},
                   {"bound", 10.0 * (s.cfg.eps_target + run.truncation_residual)}};
    }

    std::vector<int> all = s.modes.modes();
    RealModeArray xi = omega.xi_array();
    json body{{"kind", "full"},
              {"converged", run.converged},
              {"failure", failure},
              {"eps0", run.eps0},
              {"eps_final", run.eps_final},
              {"theta0", run.theta0},
              {"steps", run.steps.size()},
              {"K_fit", fit.K_fit},
              {"worst_ratio", fit.worst_ratio},
              {"fit_steps", fit.used},
              {"log_K", finite_or_null(run.log_K)},
              {"log_C_bar", finite_or_null(run.log_C_bar)},
              {"theory_smallness", run.theory_smallness},
              {"log_eps_star", finite_or_null(res.log_eps_star)},
              {"truncation_residual", run.truncation_residual},
              {"r", s.tp.r},
              {"modes", all},
              {"xi", values_json(xi, all)},
              {"V", run.converged ? values_json(res.V, all) : json(nullptr)},
              {"Lambda", values_json(run.Lambda.lambda, all)},
              {"invariance", inv}};
    CommandResult out;
    out.outputs.add("steps.csv", steps_table(run.steps).render(version, c.hash()));
    out.outputs.add("summary.json", render_json(body, version, c.hash(), c.effective()));
    out.exit_code = run.converged ? kExitOk : kExitNotConverged;
    std::ostringstream line;
    line << "kam-run: " << (run.converged ? "converged" : "not converged") << " in " << run.steps.size()
         << " steps, eps_final " << run.eps_final;
    out.summary = line.str();
    return out;
}

CommandResult kam_lowdim(const ExperimentConfig& c, const KamSetup& s, const std::string& version)
{
    const KamRunSettings& k = c.kam;
    Rng root(c.seed);
    Rng alpha_rng(root.split());
    RealModeArray alpha(s.modes, 0.0), W(s.modes, 0.0);
    for (std::size_t i = 0; i < k.tangential.size(); ++i) {
        int j = k.tangential[i];
        alpha[j] = k.alpha.empty() ? double(j) * j + alpha_rng.uniform(-0.5, 0.5) : k.alpha[i];
    }
    std::vector<int> normal = normal_modes(s.modes);
    for (int j : normal) W[j] = k.W;

    FrequencyMapResult fm;
    std::string failure;
    try {
        fm = solve_frequency_map(alpha, W, s.P, s.torus, s.cfg);
        failure = fm.last_run.failure;
    } catch (const KamError& e) {
        failure = e.what();
        fm.converged = false;
    }
    bool ok = fm.converged && fm.last_run.converged;
    json mel = nullptr;
    if (ok) {
        auto m = melnikov_check(alpha, fm.Omega, k.melnikov_mass, s.cfg.gamma);
        mel = json{{"checked", m.report.checked}, {"violations", m.report.violation_count},
                   {"min_margin", finite_or_null(m.min_margin)}, {"witness", m.witness}};
    }
    json body{{"kind", "lower_dimensional"},
              {"converged", ok},
              {"failure", failure},
              {"iterations", fm.iterations},
              {"residual", fm.residual},
              {"deviation", fm.deviation},
              {"eps", fm.eps},
              {"lipschitz", fm.lipschitz},
              {"extension_uses", fm.extension_uses},
              {"history", fm.history},
              {"r", s.tp.r},
              {"tangential", k.tangential},
              {"alpha", values_json(alpha, k.tangential)},
              {"normal", normal},
              {"Omega", fm.Omega.values.empty() ? json(nullptr) : values_json(fm.Omega, normal)},
              {"Lambda", fm.Lambda.lambda.values.empty() ? json(nullptr) : values_json(fm.Lambda.lambda, s.modes.modes())},
              {"melnikov", mel}};
    CommandResult out;
    out.outputs.add("steps.csv", steps_table(fm.last_run.steps).render(version, c.hash()));
    out.outputs.add("summary.json", render_json(body, version, c.hash(), c.effective()));
    out.exit_code = ok ? kExitOk : kExitNotConverged;
    std::ostringstream line;
    line << "kam-run (lower-dimensional): " << (ok ? "converged" : "not converged") << " after " << fm.iterations
         << " frequency-map iterations, deviation " << fm.deviation;
    out.summary = line.str();
    return out;
}

} // namespace

CommandResult cmd_kam_run(const ExperimentConfig& cfg, const std::string& version)
{
    KamSetup s = kam_setup(cfg.kam);
    return cfg.kam.tangential.empty() ? kam_full(cfg, s, version) : kam_lowdim(cfg, s, version);
}

CommandResult cmd_measure(const ExperimentConfig& cfg, const std::string& version)
{
    const MeasureSettings& m = cfg.measure;
    Rng root(cfg.seed);
    CsvTable table({"kind", "gamma", "fraction", "stderr", "fraction_over_gamma"});
    json body{{"samples", m.samples}};

    auto sweep = [&](const std::string& kind, auto&& sample) {
        std::vector<double> fractions;
        json rows = json::array();
        for (double g : m.gammas) {
            double f = sample(g, root.split());
            double se = std::sqrt(f * (1.0 - f) / double(m.samples));
            fractions.push_back(f);
            table.add_row({kind, num(g), num(f), num(se), g > 0.0 ? num(f / g) : ""});
            rows.push_back(json{{"gamma", g}, {"fraction", f}, {"stderr", se}});
        }
        json section{{"rows", rows}, {"fit", nullptr}};
        bool distinct = false;
        for (double g : m.gammas) distinct = distinct || g != m.gammas.front();
        if (distinct) {
            auto fit = fit_measure_line(m.gammas, fractions, m.samples);
            section["fit"] = json{{"slope", fit.slope},
                                  {"intercept", fit.intercept},
                                  {"intercept_stderr", fit.intercept_stderr},
                                  {"intercept_within_2se", std::fabs(fit.intercept) <= 2.0 * fit.intercept_stderr},
                                  {"max_fraction_over_gamma", fit.max_ratio}};
        }
        body[kind] = section;
    };

    sweep("full", [&](double g, uint64_t seed) { return sample_measure(g, m.L, m.j_max, m.samples, seed); });
    if (m.lowdim) {
        ModeSet modes(m.lowdim_j_max, m.tangential);
        RealModeArray W(modes, 0.0);
        for (int j : modes.modes())
            if (!modes.is_tangential(j)) W[j] = m.W;
        sweep("lower_dimensional", [&](double g, uint64_t seed) { return measure_lowdim(g, modes, m.L, m.samples, seed, W); });
    }

    CommandResult out;
    out.outputs.add("measure.csv", table.render(version, cfg.hash()));
    out.outputs.add("measure.json", render_json(body, version, cfg.hash(), cfg.effective()));
    out.summary = "measure: " + std::to_string(m.gammas.size()) + " gamma values";
    return out;
}

CommandResult cmd_verify(const ExperimentConfig& cfg, const std::string& version)
{
    const VerifySettings& v = cfg.verify;
    LemmaRanges ranges;
    ranges.kappa2 = v.kappa2;
    ranges.binomial_q_max = v.binomial_q_max;
    ranges.binomial_mass_max = v.binomial_mass_max;
    ranges.binomial_j_max = v.binomial_j_max;
    ranges.thetas = v.thetas;
    ranges.smoothing_mass_max = v.smoothing_mass_max;
    ranges.smoothing_j_max = v.smoothing_j_max;
    ranges.divisor_mass_max = v.divisor_mass_max;
    ranges.divisor_j_max = v.divisor_j_max;

    Rng root(cfg.seed);
    uint64_t algebra_seed = root.split();
    uint64_t inequality_seed = root.split();
    std::vector<VerifierReport> reports = lemma_verifiers(ranges, cfg.inject_fault);
    if (v.algebra_instances > 0)
        for (auto& r : algebra_suite(algebra_seed, v.algebra_instances)) reports.push_back(std::move(r));
    if (v.inequality_instances > 0)
        for (auto& r : inequality_suite(inequality_seed, v.inequality_instances)) reports.push_back(std::move(r));

    long checked = 0, violations = 0;
    CsvTable table({"name", "checked", "violations", "pass"});
    json list = json::array();
    for (const auto& r : reports) {
        checked += r.checked;
        violations += r.violation_count;
        table.add_row({r.name, std::to_string(r.checked), std::to_string(r.violation_count), r.ok() ? "true" : "false"});
        json vs = json::array();
        for (const auto& w : r.violations)
            vs.push_back(json{{"witness", w.witness}, {"lhs", finite_or_null(w.lhs)}, {"rhs", finite_or_null(w.rhs)}});
        list.push_back(json{{"name", r.name}, {"checked", r.checked}, {"violation_count", r.violation_count}, {"violations", vs}});
    }
    json body{{"checked", checked}, {"violation_count", violations}, {"pass", violations == 0}, {"reports", list}};

    CommandResult out;
    out.outputs.add("verify.csv", table.render(version, cfg.hash()));
    out.outputs.add("verify.json", render_json(body, version, cfg.hash(), cfg.effective()));
    out.exit_code = violations == 0 ? kExitOk : kExitNotConverged;
    out.summary = "verify: " + std::to_string(checked) + " checks, " + std::to_string(violations) + " violations";
    return out;
}

CommandResult cmd_stability(const ExperimentConfig& cfg, const std::string& version)
{
    const StabilitySettings& st = cfg.stability;
    Rng root(cfg.seed);
    uint64_t drift_seed = root.split();
    uint64_t omega_seed = root.split();
    uint64_t orbit_seed = root.split();

    ModeSet modes(1);
    WeightParams w;
    w.r = 1.0;
    TorusData torus = make_profile_torus(modes, w, 0.25, 1, 0.5);
    DriftOptions opt;
    opt.T_max = st.T_max;
    opt.dt = st.dt;
    opt.samples = st.samples;
    opt.seed = drift_seed;
    opt.method = st.method == "rk4" ? Integrator::Rk4 : Integrator::ImplicitMidpoint;
    opt.scales = st.scales;

    CsvTable rows({"kind", "delta", "samples", "exits", "min_exit", "median_exit", "drift_sup"});
    CsvTable times({"kind", "delta", "sample", "exit_time", "exited"});
    auto record = [&](const std::string& kind, const DriftReport& rep) {
        for (const auto& r : rep.rows) {
            rows.add_row({kind, num(r.delta), std::to_string(r.exit_times.size()), std::to_string(r.exits), num(r.min_exit),
                          num(r.median_exit), num(r.drift_sup)});
            for (std::size_t i = 0; i < r.exit_times.size(); ++i)
                times.add_row({kind, num(r.delta), std::to_string(i), num(r.exit_times[i]),
                               r.exit_times[i] < st.T_max ? "true" : "false"});
        }
    };

    Hamiltonian n = resonant_remainder_normal_form(torus, st.shift, st.coupling);
    DriftReport rep = drift_experiment(n, torus, st.delta0, opt);
    record("remainder", rep);
    json body{{"remainder",
               {{"exit_exponent", finite_or_null(rep.exit_exponent)},
                {"drift_exponent", finite_or_null(rep.drift_exponent)},
                {"any_exit", rep.any_exit},
                {"all_exit", rep.all_exit}}}};
    if (st.control) {
        RealModeArray xi(modes, st.shift);
        DriftReport ctl = drift_experiment(diagonal_hamiltonian(FrequencyVector::from_xi(xi), 8), torus, st.delta0, opt);
        record("control", ctl);
        body["control"] = json{{"any_exit", ctl.any_exit}};
    }

    int code = kExitOk;
    if (st.orbit) {
        ModeSet om(st.orbit_j_max);
        auto f = NonlinearitySpec::power(2);
        NlsParams tp;
        tp.r = st.orbit_r;
        KamConfig base;
        base.degree_cutoff = st.orbit_degree_cutoff;
        KamConfig kc;
        TorusData t2;
        try {
            kc = nls_kam_config(tp, f, base);
            kc.validate();
            t2 = nls_profile_torus(om, tp, 1);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        FrequencyVector omega = sample_scheme_frequency(om, kc.gamma, kc.degree_cutoff, omega_seed);
        auto res = run_potential_theorem(f, omega, t2, kc, tp.r);
        json orbit{{"converged", res.run.converged}};
        if (res.run.converged) {
            auto od = torus_orbit_defect(res.run.N, t2, omega, st.orbit_T, st.orbit_dt, st.orbit_points, orbit_seed);
            orbit["max_defect"] = od.max_defect;
            orbit["modulus_defect"] = od.modulus_defect;
            orbit["integrator_defect"] = od.integrator_defect;
            orbit["points"] = od.points;
            orbit["bound"] = 100.0 * (kc.eps_target + res.run.truncation_residual) * st.orbit_T + od.integrator_defect;
        } else {
            code = kExitNotConverged;
        }
        body["orbit"] = orbit;
    }

    CommandResult out;
    out.outputs.add("drift.csv", rows.render(version, cfg.hash()));
    out.outputs.add("exit_times.csv", times.render(version, cfg.hash()));
    out.outputs.add("stability.json", render_json(body, version, cfg.hash(), cfg.effective()));
    out.exit_code = code;
    std::ostringstream line;
    line << "stability: exit exponent " << rep.exit_exponent << ", drift exponent " << rep.drift_exponent;
    out.summary = line.str();
    return out;
}

CommandResult run_command(const ExperimentConfig& cfg, const std::string& version)
{
    if (cfg.command == "kam-run") return cmd_kam_run(cfg, version);
    if (cfg.command == "measure") return cmd_measure(cfg, version);
    if (cfg.command == "verify") return cmd_verify(cfg, version);
    if (cfg.command == "stability") return cmd_stability(cfg, version);
    throw ConfigError("unknown subcommand '" + cfg.command + "'");
}

} // namespace kamnf::cli
