#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "json.hpp"
#include "kamnf/parallel.hpp"
#include "kamnf/suites.hpp"

using namespace kamnf;
using namespace kamnf::cli;
using nlohmann::json;

namespace {

const std::string kVersion = "acceptance";

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

ExperimentConfig make_config(const std::string& command, const json& settings, uint64_t seed = 1)
{
    ExperimentConfig cfg;
    cfg.command = command;
    apply_json(cfg, settings);
    cfg.seed = seed;
    validate(cfg);
    return cfg;
}

const std::string& file_of(const CommandResult& r, const std::string& name)
{
    for (const auto& [n, content] : r.outputs.files)
        if (n == name) return content;
    throw std::runtime_error("missing output " + name);
}

// Rows of a CSV without quoted fields.
std::vector<std::vector<std::string>> csv_rows(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::istringstream cs(line);
        std::string cell;
        while (std::getline(cs, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name)
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::runtime_error("missing column " + name);
}

long violations_of(const std::vector<VerifierReport>& reports, long& checked, std::string& worst)
{
    long v = 0;
    checked = 0;
    for (const auto& r : reports) {
        checked += r.checked;
        v += r.violation_count;
        if (!r.ok() && worst.empty()) worst = r.name + " at " + r.violations.front().witness;
    }
    return v;
}

json desk_settings()
{
    return json{{"j_max", 3},   {"degree_cutoff", 8}, {"support", 2},     {"power", 2},         {"p", 2.0},
                {"s", 1.0},     {"theta", 0.5},       {"a", 0.0},         {"gamma", 0.1},       {"eps0", 1e-3},
                {"eps_target", 1e-10}, {"invariance_points", 20}};
}

struct DeskRun {
    json summary;
    std::vector<std::vector<std::string>> steps;
    double seconds = 0.0;
};

Outcome criterion_convergence(const DeskRun& run)
{
    const json& s = run.summary;
    if (!s["converged"].get<bool>()) return {false, "run did not converge: " + s["failure"].get<std::string>()};
    const auto& header = run.steps.front();
    std::size_t ce = column(header, "eps"), cn = column(header, "eps_next");
    double K = s["K_fit"].get<double>();
    bool quadratic = true, decreasing = true;
    double worst = 0.0;
    for (std::size_t i = 1; i < run.steps.size(); ++i) {
        double e = std::stod(run.steps[i][ce]), en = std::stod(run.steps[i][cn]);
        quadratic = quadratic && en <= 5.0 * K * e * e;
        decreasing = decreasing && en < e;
        worst = std::max(worst, en / (K * e * e));
    }
    double eps0 = s["eps0"].get<double>(), eps_final = s["eps_final"].get<double>();
    int steps = s["steps"].get<int>();
    bool eps0_ok = std::fabs(eps0 / 1e-3 - 1.0) < 0.05;
    bool pass = eps0_ok && quadratic && decreasing && eps_final < 1e-10 && steps <= 6 && run.seconds < 300.0;
    return {pass, "eps0 " + fmt(eps0) + ", eps_final " + fmt(eps_final) + " after " + std::to_string(steps) +
                      " steps (<= 6), K_fit " + fmt(K) + ", max eps_next/(K_fit eps^2) " + fmt(worst) + " (<= 5), " +
                      fmt(run.seconds) + " s (< 300)"};
}

Outcome criterion_invariance(const DeskRun& run)
{
    const json& inv = run.summary["invariance"];
    if (inv.is_null()) return {false, "no invariance check (run did not converge)"};
    double d = inv["max_defect"].get<double>(), b = inv["bound"].get<double>();
    bool pass = inv["points"].get<int>() == 20 && d <= b;
    return {pass, "max defect " + fmt(d) + " <= " + fmt(b) + " at " + std::to_string(inv["points"].get<int>()) +
                      " points (untransformed field: " + fmt(inv["untransformed_max_defect"].get<double>()) + ")"};
}

Outcome criterion_suite(const std::vector<VerifierReport>& reports, int instances)
{
    long checked = 0;
    std::string worst;
    long v = violations_of(reports, checked, worst);
    bool all_ran = true;
    for (const auto& r : reports) all_ran = all_ran && r.checked >= instances;
    std::string detail = std::to_string(reports.size()) + " families, " + std::to_string(checked) + " checks, " +
                         std::to_string(v) + " violations";
    if (!all_ran) detail += ", a family ran fewer than " + std::to_string(instances) + " checks";
    if (!worst.empty()) detail += ", first: " + worst;
    return {v == 0 && all_ran, detail};
}

Outcome criterion_lemmas()
{
    auto t0 = std::chrono::steady_clock::now();
    auto reports = lemma_verifiers(LemmaRanges{});
    double secs = seconds_since(t0);
    long checked = 0;
    std::string worst;
    long v = violations_of(reports, checked, worst);
    return {v == 0 && checked > 0 && secs < 60.0, std::to_string(checked) + " checks, " + std::to_string(v) +
                                                      " violations, " + fmt(secs) + " s (< 60)" +
                                                      (worst.empty() ? "" : ", first: " + worst)};
}

Outcome criterion_measure()
{
    auto cfg = make_config("measure", json{{"gammas", {0.05, 0.1, 0.2}}, {"L", 4}, {"j_max", 4}, {"samples", 10000}});
    auto res = run_command(cfg, kVersion);
    json doc = json::parse(file_of(res, "measure.json"));
    const json& fit = doc["full"]["fit"];
    std::string fractions;
    for (const auto& row : doc["full"]["rows"]) fractions += (fractions.empty() ? "" : "/") + fmt(row["fraction"].get<double>());
    double b = fit["intercept"].get<double>(), se = fit["intercept_stderr"].get<double>();
    return {std::fabs(b) <= 2.0 * se, "fractions " + fractions + " at gamma 0.05/0.1/0.2, slope " +
                                          fmt(fit["slope"].get<double>()) + ", intercept " + fmt(b) + " = " +
                                          fmt(b / se) + " standard errors (<= 2)"};
}

Outcome criterion_stability()
{
    auto cfg = make_config("stability", json{{"orbit", false}});
    auto res = run_command(cfg, kVersion);
    json doc = json::parse(file_of(res, "stability.json"));
    if (doc["remainder"]["exit_exponent"].is_null()) return {false, "no exits to fit"};
    double e = doc["remainder"]["exit_exponent"].get<double>();
    bool control_exits = doc["control"]["any_exit"].get<bool>();
    return {std::fabs(e + 2.0) <= 0.3 && !control_exits,
            "exit-time exponent " + fmt(e) + " (target -2 +- 0.3), drift exponent " +
                fmt(doc["remainder"]["drift_exponent"].get<double>()) + ", D_omega control " +
                (control_exits ? "exits" : "never exits")};
}

Outcome criterion_lower_dimensional(const DeskRun& desk)
{
    auto cfg = make_config("kam-run", json{{"j_max", 2},
                                           {"degree_cutoff", 6},
                                           {"tangential", {-1, 1}},
                                           {"W", 0.1},
                                           {"gamma", 0.05},
                                           {"r", 0.02},
                                           {"melnikov_mass", 3}});
    auto res = run_command(cfg, kVersion);
    json s = json::parse(file_of(res, "summary.json"));
    if (!s["converged"].get<bool>()) return {false, "frequency map did not converge: " + s["failure"].get<std::string>()};
    double dev = s["deviation"].get<double>(), eps = s["eps"].get<double>(), gamma = 0.05;
    const double C = 1.0;
    const json& mel = s["melnikov"];
    bool melnikov_ok = mel["violations"].get<long>() == 0 && mel["checked"].get<long>() > 0 &&
                       mel["min_margin"].is_number() && mel["min_margin"].get<double>() > 1.0;
    // The lower-dimensional and full runs share the counter-term step: same per-step diagnostics.
    auto low_header = csv_rows(file_of(res, "steps.csv")).front();
    bool shared = low_header == desk.steps.front() && csv_rows(file_of(res, "steps.csv")).size() > 1;
    bool pass = dev <= C * gamma * eps && melnikov_ok && shared;
    return {pass, "sup|Omega_j - j^2 - W_j| " + fmt(dev) + " <= C gamma eps = " + fmt(C * gamma * eps) +
                      " (C = 1), Melnikov " + std::to_string(mel["checked"].get<long>()) + " resonances, " +
                      std::to_string(mel["violations"].get<long>()) + " violations, min margin " +
                      fmt(mel["min_margin"].get<double>()) + ", counter-term steps " +
                      (shared ? "shared with the full run" : "NOT shared")};
}

Outcome criterion_determinism()
{
    std::vector<ExperimentConfig> configs = {
        make_config("kam-run", json{{"j_max", 2}, {"degree_cutoff", 6}, {"invariance_points", 4}}, 3),
        make_config("kam-run", json{{"j_max", 2}, {"degree_cutoff", 6}, {"tangential", {-1, 1}}, {"gamma", 0.05}, {"r", 0.02}}, 3),
        make_config("measure", json{{"samples", 4000}, {"lowdim", true}}, 3),
        make_config("verify", json{{"algebra_instances", 5}, {"inequality_instances", 3}}, 3),
        make_config("stability", json{{"T_max", 200.0}, {"samples", 4}, {"delta0", 0.2}, {"coupling", 400.0}, {"orbit_T", 2.0}}, 3)};
    long files = 0, bytes = 0;
    for (const auto& cfg : configs) {
        set_num_threads(1);
        auto a = run_command(cfg, kVersion);
        set_num_threads(2);
        auto b = run_command(cfg, kVersion);
        set_num_threads(1);
        if (a.exit_code != b.exit_code) return {false, cfg.command + ": exit codes differ"};
        if (a.outputs.files != b.outputs.files) return {false, cfg.command + ": outputs differ between runs"};
        for (const auto& [name, content] : a.outputs.files) {
            ++files;
            bytes += long(content.size());
        }
    }
    return {true, std::to_string(configs.size()) + " configs run twice (1 and 2 threads), " + std::to_string(files) +
                      " files, " + std::to_string(bytes) + " bytes identical"};
}

Outcome guarded(const std::function<Outcome()>& f)
{
    try {
        return f();
    } catch (const std::exception& e) {
        return {false, std::string("error: ") + e.what()};
    }
}

} // namespace

int main()
{
    set_num_threads(1);
    DeskRun desk;
    std::string desk_error;
    try {
        auto cfg = make_config("kam-run", desk_settings());
        auto t0 = std::chrono::steady_clock::now();
        auto res = run_command(cfg, kVersion);
        desk.seconds = seconds_since(t0);
        desk.summary = json::parse(file_of(res, "summary.json"));
        desk.steps = csv_rows(file_of(res, "steps.csv"));
    } catch (const std::exception& e) {
        desk_error = e.what();
    }
    auto with_desk = [&](const std::function<Outcome()>& f) {
        return desk_error.empty() ? guarded(f) : Outcome{false, "desk run failed: " + desk_error};
    };

    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"quadratic KAM convergence", [&] { return with_desk([&] { return criterion_convergence(desk); }); }},
        {"torus invariance", [&] { return with_desk([&] { return criterion_invariance(desk); }); }},
        {"exact-algebra suite", [] { return guarded([] { return criterion_suite(algebra_suite(2024, 100), 100); }); }},
        {"inequality suite", [] { return guarded([] { return criterion_suite(inequality_suite(2025, 50), 50); }); }},
        {"lemma verifiers", [] { return guarded(criterion_lemmas); }},
        {"Diophantine measure", [] { return guarded(criterion_measure); }},
        {"stability scaling", [] { return guarded(criterion_stability); }},
        {"lower-dimensional run", [&] { return with_desk([&] { return criterion_lower_dimensional(desk); }); }},
        {"determinism", [] { return guarded(criterion_determinism); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o = criteria[i].second();
        failures += o.pass ? 0 : 1;
        std::printf("CRITERION %zu %s: %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
