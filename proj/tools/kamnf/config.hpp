#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace kamnf::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KamRunSettings {
    int j_max = 3;
    int degree_cutoff = 8;
    int support = -1;                  // -1: every mode
    int power = 2;                     // f = y^power unless coeffs are given
    std::vector<std::vector<double>> coeffs;   // rows (d, k, re, im)
    double a_strip = 4.0;
    double R = 1.0;
    double p = 2.0;
    double s = 1.0;
    double a = 0.0;
    double theta = 0.5;
    double gamma = 0.1;
    double eps0 = 1e-3;
    double r = 0.0;                    // 0: tuned from eps0
    double eps_target = 1e-10;
    int max_steps = 8;
    std::vector<double> xi;            // empty: sampled Diophantine frequency
    std::vector<int> tangential;       // non-empty: lower-dimensional run
    double W = 0.1;
    std::vector<double> alpha;         // on the tangential modes; empty: sampled
    int melnikov_mass = 3;
    int invariance_points = 20;
};

struct MeasureSettings {
    std::vector<double> gammas = {0.05, 0.1, 0.2};
    int L = 4;
    int j_max = 4;
    long samples = 10000;
    bool lowdim = false;
    int lowdim_j_max = 3;
    std::vector<int> tangential = {-1, 1};
    double W = 0.1;
};

struct VerifySettings {
    std::vector<double> kappa2 = {0.25, 0.5, 0.7};
    int binomial_q_max = 4;
    int binomial_mass_max = 8;
    int binomial_j_max = 4;
    std::vector<double> thetas = {0.3, 0.5, 0.8};
    int smoothing_mass_max = 3;
    int smoothing_j_max = 4;
    int divisor_mass_max = 3;
    int divisor_j_max = 4;
    int algebra_instances = 100;
    int inequality_instances = 50;
};

struct StabilitySettings {
    double shift = 0.1;
    double coupling = 3200.0;
    double delta0 = 0.1;
    double T_max = 1500.0;
    double dt = 0.02;
    int samples = 16;
    std::vector<double> scales = {1.0, 0.5, 0.25};
    std::string method = "midpoint";
    bool control = true;
    bool orbit = true;
    int orbit_j_max = 2;
    int orbit_degree_cutoff = 6;
    double orbit_r = 0.02;
    double orbit_T = 10.0;
    double orbit_dt = 1e-3;
    int orbit_points = 3;
};

struct ExperimentConfig {
    std::string command;
    uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";
    bool inject_fault = false;
    KamRunSettings kam;
    MeasureSettings measure;
    VerifySettings verify;
    StabilitySettings stability;

    // Effective settings of the selected command, seed included; the basis of the config hash.
    nlohmann::json effective() const;
    std::string hash() const;
};

// Reads the settings of `command` from a JSON object; unknown keys and out-of-range values throw ConfigError.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
void validate(const ExperimentConfig& cfg);

nlohmann::json load_json_file(const std::string& path);

// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

} // namespace kamnf::cli
