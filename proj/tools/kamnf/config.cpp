#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "kamnf/indexing.hpp"

namespace kamnf::cli {

using nlohmann::json;

namespace {

void read_value(const json& v, const std::string& key, double& out)
{
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError("'" + key + "' must be finite");
}

void read_value(const json& v, const std::string& key, int& out)
{
    if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
    out = v.get<int>();
}

void read_value(const json& v, const std::string& key, long& out)
{
    if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
    out = v.get<long>();
}

void read_value(const json& v, const std::string& key, bool& out)
{
    if (!v.is_boolean()) throw ConfigError("'" + key + "' must be true or false");
    out = v.get<bool>();
}

void read_value(const json& v, const std::string& key, std::string& out)
{
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
    out = v.get<std::string>();
}

template <class T>
void read_value(const json& v, const std::string& key, std::vector<T>& out)
{
    if (!v.is_array()) throw ConfigError("'" + key + "' must be an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
        T x{};
        read_value(v[i], key + "[" + std::to_string(i) + "]", x);
        out.push_back(x);
    }
}

using FieldTable = std::map<std::string, std::function<void(const json&)>>;

template <class T>
void bind_field(FieldTable& t, const std::string& key, T& field)
{
    t[key] = [&field, key](const json& v) { read_value(v, key, field); };
}

FieldTable kam_fields(KamRunSettings& k)
{
    FieldTable t;
    bind_field(t, "j_max", k.j_max);
    bind_field(t, "degree_cutoff", k.degree_cutoff);
    bind_field(t, "support", k.support);
    bind_field(t, "power", k.power);
    bind_field(t, "coeffs", k.coeffs);
    bind_field(t, "a_strip", k.a_strip);
    bind_field(t, "R", k.R);
    bind_field(t, "p", k.p);
    bind_field(t, "s", k.s);
    bind_field(t, "a", k.a);
    bind_field(t, "theta", k.theta);
    bind_field(t, "gamma", k.gamma);
    bind_field(t, "eps0", k.eps0);
    bind_field(t, "r", k.r);
    bind_field(t, "eps_target", k.eps_target);
    bind_field(t, "max_steps", k.max_steps);
    bind_field(t, "xi", k.xi);
    bind_field(t, "tangential", k.tangential);
    bind_field(t, "W", k.W);
    bind_field(t, "alpha", k.alpha);
    bind_field(t, "melnikov_mass", k.melnikov_mass);
    bind_field(t, "invariance_points", k.invariance_points);
    return t;
}

FieldTable measure_fields(MeasureSettings& m)
{
    FieldTable t;
    bind_field(t, "gammas", m.gammas);
    bind_field(t, "L", m.L);
    bind_field(t, "j_max", m.j_max);
    bind_field(t, "samples", m.samples);
    bind_field(t, "lowdim", m.lowdim);
    bind_field(t, "lowdim_j_max", m.lowdim_j_max);
    bind_field(t, "tangential", m.tangential);
    bind_field(t, "W", m.W);
    return t;
}

FieldTable verify_fields(VerifySettings& v)
{
    FieldTable t;
    bind_field(t, "kappa2", v.kappa2);
    bind_field(t, "binomial_q_max", v.binomial_q_max);
    bind_field(t, "binomial_mass_max", v.binomial_mass_max);
    bind_field(t, "binomial_j_max", v.binomial_j_max);
    bind_field(t, "thetas", v.thetas);
    bind_field(t, "smoothing_mass_max", v.smoothing_mass_max);
    bind_field(t, "smoothing_j_max", v.smoothing_j_max);
    bind_field(t, "divisor_mass_max", v.divisor_mass_max);
    bind_field(t, "divisor_j_max", v.divisor_j_max);
    bind_field(t, "algebra_instances", v.algebra_instances);
    bind_field(t, "inequality_instances", v.inequality_instances);
    return t;
}

FieldTable stability_fields(StabilitySettings& s)
{
    FieldTable t;
    bind_field(t, "shift", s.shift);
    bind_field(t, "coupling", s.coupling);
    bind_field(t, "delta0", s.delta0);
    bind_field(t, "T_max", s.T_max);
    bind_field(t, "dt", s.dt);
    bind_field(t, "samples", s.samples);
    bind_field(t, "scales", s.scales);
    bind_field(t, "method", s.method);
    bind_field(t, "control", s.control);
    bind_field(t, "orbit", s.orbit);
    bind_field(t, "orbit_j_max", s.orbit_j_max);
    bind_field(t, "orbit_degree_cutoff", s.orbit_degree_cutoff);
    bind_field(t, "orbit_r", s.orbit_r);
    bind_field(t, "orbit_T", s.orbit_T);
    bind_field(t, "orbit_dt", s.orbit_dt);
    bind_field(t, "orbit_points", s.orbit_points);
    return t;
}

FieldTable fields_for(ExperimentConfig& cfg)
{
    if (cfg.command == "kam-run") return kam_fields(cfg.kam);
    if (cfg.command == "measure") return measure_fields(cfg.measure);
    if (cfg.command == "verify") return verify_fields(cfg.verify);
    if (cfg.command == "stability") return stability_fields(cfg.stability);
    throw ConfigError("unknown subcommand '" + cfg.command + "'");
}

void require(bool ok, const std::string& message)
{
    if (!ok) throw ConfigError(message);
}

void check_mode_list(const std::vector<int>& modes, int j_max, const std::string& key)
{
    std::set<int> seen;
    for (int j : modes) {
        require(std::abs(j) <= j_max, "'" + key + "' entry " + std::to_string(j) + " lies outside |j| <= " + std::to_string(j_max));
        require(seen.insert(j).second, "'" + key + "' repeats mode " + std::to_string(j));
    }
}

void check_j_max(int j_max, const std::string& key)
{
    require(j_max >= 0 && j_max <= kMaxAbsMode, "'" + key + "' must lie in [0, " + std::to_string(kMaxAbsMode) + "]");
}

void validate_kam(const KamRunSettings& k)
{
    check_j_max(k.j_max, "j_max");
    require(k.degree_cutoff >= 2 && k.degree_cutoff % 2 == 0 && k.degree_cutoff <= 16,
            "'degree_cutoff' must be even and in [2, 16]");
    require(k.support >= -1 && k.support <= k.j_max, "'support' must be -1 or in [0, j_max]");
    if (k.coeffs.empty()) {
        require(k.power >= 1, "'power' must be at least 1");
        require(2 * (k.power + 1) <= k.degree_cutoff, "'degree_cutoff' must be at least 2 (power + 1)");
    }
    for (std::size_t i = 0; i < k.coeffs.size(); ++i) {
        const auto& row = k.coeffs[i];
        std::string where = "'coeffs[" + std::to_string(i) + "]'";
        require(row.size() == 4, where + " must be [d, k, re, im]");
        require(row[0] >= 1 && row[0] == std::floor(row[0]), where + " needs an integer degree d >= 1");
        require(row[1] == std::floor(row[1]), where + " needs an integer harmonic k");
    }
    require(k.a_strip > 0.0, "'a_strip' must be positive");
    require(k.R > 0.0, "'R' must be positive");
    require(k.p > 0.5, "'p' must exceed 1/2");
    require(k.s > 0.0, "'s' must be positive");
    require(k.a >= 0.0 && k.a < k.a_strip, "'a' must lie in [0, a_strip)");
    require(k.theta > 0.0 && k.theta < 1.0, "'theta' must lie in (0, 1)");
    require(k.gamma > 0.0 && k.gamma <= 1.0, "'gamma' must lie in (0, 1]");
    require(k.eps0 > 0.0, "'eps0' must be positive");
    require(k.r >= 0.0, "'r' must be nonnegative (0 tunes it from eps0)");
    require(k.eps_target > 0.0, "'eps_target' must be positive");
    require(k.max_steps >= 1 && k.max_steps <= 64, "'max_steps' must lie in [1, 64]");
    if (!k.xi.empty()) {
        require(int(k.xi.size()) == 2 * k.j_max + 1, "'xi' needs 2 j_max + 1 entries ordered from -j_max");
        for (double x : k.xi) require(std::fabs(x) <= 0.5, "'xi' entries must lie in [-1/2, 1/2]");
    }
    check_mode_list(k.tangential, k.j_max, "tangential");
    if (!k.tangential.empty()) {
        require(int(k.tangential.size()) < 2 * k.j_max + 1, "'tangential' must leave at least one normal mode");
        require(k.alpha.empty() || k.alpha.size() == k.tangential.size(), "'alpha' needs one entry per tangential mode");
    } else {
        require(k.alpha.empty(), "'alpha' needs 'tangential'");
    }
    require(k.melnikov_mass >= 0, "'melnikov_mass' must be nonnegative");
    require(k.invariance_points >= 0, "'invariance_points' must be nonnegative");
}

void validate_measure(const MeasureSettings& m)
{
    require(!m.gammas.empty(), "'gammas' must not be empty");
    for (double g : m.gammas) require(g >= 0.0 && g <= 1.0, "'gammas' entries must lie in [0, 1]");
    require(m.L >= 1 && m.L <= 8, "'L' must lie in [1, 8]");
    check_j_max(m.j_max, "j_max");
    require(m.samples >= 1, "'samples' must be at least 1");
    if (m.lowdim) {
        check_j_max(m.lowdim_j_max, "lowdim_j_max");
        require(!m.tangential.empty(), "'tangential' must not be empty for the lower-dimensional sweep");
        check_mode_list(m.tangential, m.lowdim_j_max, "tangential");
    }
}

void validate_verify(const VerifySettings& v)
{
    for (double k : v.kappa2) require(k > 0.0 && k < 1.0, "'kappa2' entries must lie in (0, 1)");
    for (double t : v.thetas) require(t > 0.0 && t < 1.0, "'thetas' entries must lie in (0, 1)");
    require(v.binomial_q_max >= 0 && v.binomial_mass_max >= 0 && v.smoothing_mass_max >= 0 && v.divisor_mass_max >= 0,
            "verifier mass and q bounds must be nonnegative");
    for (int j : {v.binomial_j_max, v.smoothing_j_max, v.divisor_j_max}) check_j_max(j, "verifier j_max");
    require(v.algebra_instances >= 0 && v.inequality_instances >= 0, "instance counts must be nonnegative");
}

void validate_stability(const StabilitySettings& s)
{
    require(std::fabs(s.shift) <= 0.5, "'shift' must lie in [-1/2, 1/2]");
    require(s.delta0 > 0.0 && s.delta0 < 0.4, "'delta0' must lie in (0, 0.4) so the 2 delta annulus stays off the origin");
    require(s.T_max > 0.0, "'T_max' must be positive");
    require(s.dt > 0.0 && s.dt <= s.T_max, "'dt' must lie in (0, T_max]");
    require(s.samples >= 1, "'samples' must be at least 1");
    require(s.scales.size() >= 2, "'scales' needs at least two entries for the exponent fit");
    for (double x : s.scales) require(x > 0.0 && x <= 1.0, "'scales' entries must lie in (0, 1]");
    require(s.method == "midpoint" || s.method == "rk4", "'method' must be \"midpoint\" or \"rk4\"");
    check_j_max(s.orbit_j_max, "orbit_j_max");
    require(s.orbit_degree_cutoff >= 6 && s.orbit_degree_cutoff % 2 == 0, "'orbit_degree_cutoff' must be even and at least 6");
    require(s.orbit_r > 0.0, "'orbit_r' must be positive");
    require(s.orbit_T > 0.0 && s.orbit_dt > 0.0 && s.orbit_dt <= s.orbit_T, "'orbit_T' and 'orbit_dt' must satisfy 0 < dt <= T");
    require(s.orbit_points >= 1, "'orbit_points' must be at least 1");
}

json kam_json(const KamRunSettings& k)
{
    return json{{"j_max", k.j_max}, {"degree_cutoff", k.degree_cutoff}, {"support", k.support}, {"power", k.power},
                {"coeffs", k.coeffs}, {"a_strip", k.a_strip}, {"R", k.R}, {"p", k.p}, {"s", k.s}, {"a", k.a},
                {"theta", k.theta}, {"gamma", k.gamma}, {"eps0", k.eps0}, {"r", k.r}, {"eps_target", k.eps_target},
                {"max_steps", k.max_steps}, {"xi", k.xi}, {"tangential", k.tangential}, {"W", k.W},
                {"alpha", k.alpha}, {"melnikov_mass", k.melnikov_mass}, {"invariance_points", k.invariance_points}};
}

json measure_json(const MeasureSettings& m)
{
    return json{{"gammas", m.gammas}, {"L", m.L}, {"j_max", m.j_max}, {"samples", m.samples}, {"lowdim", m.lowdim},
                {"lowdim_j_max", m.lowdim_j_max}, {"tangential", m.tangential}, {"W", m.W}};
}

json verify_json(const VerifySettings& v)
{
    return json{{"kappa2", v.kappa2}, {"binomial_q_max", v.binomial_q_max}, {"binomial_mass_max", v.binomial_mass_max},
                {"binomial_j_max", v.binomial_j_max}, {"thetas", v.thetas}, {"smoothing_mass_max", v.smoothing_mass_max},
                {"smoothing_j_max", v.smoothing_j_max}, {"divisor_mass_max", v.divisor_mass_max},
                {"divisor_j_max", v.divisor_j_max}, {"algebra_instances", v.algebra_instances},
                {"inequality_instances", v.inequality_instances}};
}

json stability_json(const StabilitySettings& s)
{
    return json{{"shift", s.shift}, {"coupling", s.coupling}, {"delta0", s.delta0}, {"T_max", s.T_max}, {"dt", s.dt},
                {"samples", s.samples}, {"scales", s.scales}, {"method", s.method}, {"control", s.control},
                {"orbit", s.orbit}, {"orbit_j_max", s.orbit_j_max}, {"orbit_degree_cutoff", s.orbit_degree_cutoff},
                {"orbit_r", s.orbit_r}, {"orbit_T", s.orbit_T}, {"orbit_dt", s.orbit_dt}, {"orbit_points", s.orbit_points}};
}

} // namespace

nlohmann::json ExperimentConfig::effective() const
{
    json settings;
    if (command == "kam-run") settings = kam_json(kam);
    else if (command == "measure") settings = measure_json(measure);
    else if (command == "verify") settings = verify_json(verify);
    else if (command == "stability") settings = stability_json(stability);
    json out{{"command", command}, {"seed", seed}, {"settings", settings}};
    if (inject_fault) out["inject_fault"] = true;
    return out;
}

std::string ExperimentConfig::hash() const
{
    return fnv1a_hex(effective().dump());
}

void apply_json(ExperimentConfig& cfg, const nlohmann::json& j)
{
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    FieldTable table = fields_for(cfg);
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") {
            bool nonnegative = value.is_number_unsigned() || (value.is_number_integer() && value.get<int64_t>() >= 0);
            if (!nonnegative) throw ConfigError("'seed' must be a nonnegative integer");
            cfg.seed = value.get<uint64_t>();
            continue;
        }
        auto it = table.find(key);
        if (it == table.end()) {
            std::string allowed;
            for (const auto& [name, setter] : table) allowed += (allowed.empty() ? "" : ", ") + name;
            throw ConfigError("unknown key '" + key + "' for " + cfg.command + " (allowed: seed, " + allowed + ")");
        }
        it->second(value);
    }
}

void validate(const ExperimentConfig& cfg)
{
    if (cfg.threads < 1) throw ConfigError("--threads must be at least 1");
    if (cfg.command == "kam-run") validate_kam(cfg.kam);
    else if (cfg.command == "measure") validate_measure(cfg.measure);
    else if (cfg.command == "verify") validate_verify(cfg.verify);
    else if (cfg.command == "stability") validate_stability(cfg.stability);
    else throw ConfigError("unknown subcommand '" + cfg.command + "'");
}

nlohmann::json load_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

std::string fnv1a_hex(const std::string& text)
{
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace kamnf::cli
