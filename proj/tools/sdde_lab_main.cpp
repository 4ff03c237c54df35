#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sdde/expr.hpp"
#include "sdde/runner.hpp"

namespace {

struct ModeArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    bool has_out = false;
    bool has_seed = false;
    bool has_paths = false;
};

void attach_options(CLI::App* sub, ModeArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.out_dir, "output directory (overrides config)")
        ->each([&args](const std::string&) { args.has_out = true; });
    sub->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&args](const std::string&) { args.has_seed = true; });
    sub->add_option("--paths", args.paths, "Monte Carlo path count (overrides config)")
        ->each([&args](const std::string&) { args.has_paths = true; });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sdde-lab: adaptive Euler-Maruyama experiments for delay SDEs"};
    app.require_subcommand(1);

    const char* mode_names[] = {"simulate", "converge", "moments", "stability", "explode",
                                "check"};
    const char* mode_help[] = {
        "dump adaptive trajectories and first step sizes",
        "strong-error study against a bridged fine reference",
        "Monte Carlo moment curve, long horizon",
        "per-path decay-rate estimates",
        "fixed-step blow-up fraction and growth audit",
        "sample the step-size condition over a box",
    };
    ModeArgs args;
    for (int i = 0; i < 6; ++i)
        attach_options(app.add_subcommand(mode_names[i], mode_help[i]), args);

    CLI11_PARSE(app, argc, argv);

    const std::string mode_name = app.get_subcommands().front()->get_name();
    sdde::CliOverrides overrides;
    if (args.has_out) overrides.out_dir = args.out_dir;
    if (args.has_seed) overrides.seed = args.seed;
    if (args.has_paths) overrides.paths = args.paths;

    try {
        const sdde::RunConfig cfg =
            sdde::load_config_file(args.config_path, sdde::parse_run_mode(mode_name), overrides);
        return sdde::run_experiment(cfg);
    } catch (const sdde::ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const sdde::expr::ExprError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const sdde::DomainError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 3;
    }
}
