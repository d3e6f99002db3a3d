#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "kamnf/parallel.hpp"

#ifndef KAMNF_VERSION
#define KAMNF_VERSION "0.0.0"
#endif

namespace {

struct CommonFlags {
    std::string config;
    uint64_t seed = 0;
    std::string out = ".";
    int threads = 1;
    bool inject_fault = false;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& about, CommonFlags& flags)
{
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", flags.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "seed of the experiment generator (overrides the config)");
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    sub->add_option("--threads", flags.threads, "worker threads")->capture_default_str();
    return sub;
}

} // namespace

int main(int argc, char** argv)
{
    using namespace kamnf::cli;
    CLI::App app{"Counter-term KAM normal forms for the NLS on the circle"};
    app.set_version_flag("--version", KAMNF_VERSION);
    app.require_subcommand(1);
    CommonFlags flags;
    add_command(app, "kam-run", "run the counter-term KAM scheme", flags);
    add_command(app, "measure", "Monte Carlo measure of the Diophantine set", flags);
    CLI::App* verify = add_command(app, "verify", "brute-force lemma verifiers and randomised suites", flags);
    verify->add_flag("--inject-fault", flags.inject_fault, "flip one verified inequality (harness self-test)")->group("");
    add_command(app, "stability", "exit times from the annulus and orbit defects", flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    ExperimentConfig cfg;
    cfg.command = app.get_subcommands().front()->get_name();
    try {
        if (!flags.config.empty()) apply_json(cfg, load_json_file(flags.config));
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--seed") > 0) cfg.seed = flags.seed;
        cfg.threads = flags.threads;
        cfg.out_dir = flags.out;
        cfg.inject_fault = flags.inject_fault;
        validate(cfg);
        kamnf::set_num_threads(cfg.threads);
        CommandResult result = run_command(cfg, KAMNF_VERSION);
        result.outputs.write(cfg.out_dir);
        std::cout << result.summary << "\n";
        return result.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
