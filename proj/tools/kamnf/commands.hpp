#pragma once

#include <string>

#include "config.hpp"
#include "output.hpp"

namespace kamnf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNotConverged = 2;

struct CommandResult {
    OutputSet outputs;
    int exit_code = kExitOk;
    std::string summary;   // one line for the terminal
};

CommandResult cmd_kam_run(const ExperimentConfig& cfg, const std::string& version);
CommandResult cmd_measure(const ExperimentConfig& cfg, const std::string& version);
CommandResult cmd_verify(const ExperimentConfig& cfg, const std::string& version);
CommandResult cmd_stability(const ExperimentConfig& cfg, const std::string& version);

CommandResult run_command(const ExperimentConfig& cfg, const std::string& version);

} // namespace kamnf::cli
