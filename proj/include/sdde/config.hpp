#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdde/problems.hpp"

namespace sdde {

enum class RunMode { Simulate, Converge, Moments, Stability, Explode, Check };

const char* run_mode_name(RunMode mode);
RunMode parse_run_mode(const std::string& name);

/// Fully validated run description. `canonical` is the normalized JSON the
/// config hash and the replay manifest are built from.
struct RunConfig {
    RunConfig(RunMode m, Problem p) : mode(m), problem(std::move(p)) {}

    RunMode mode = RunMode::Simulate;
    Problem problem;
    double T = 1.0;
    std::vector<double> deltas{0.1};
    double p = 2.0;
    std::size_t paths = 100;
    std::uint64_t master_seed = 0x5DDE1ABULL;
    double delta_ref = 0.0;
    double h_min = 1e-12;
    std::size_t max_steps = 20'000'000;
    double tail_fraction = 0.5;
    double fixed_dt = 2e-3;
    std::size_t k_steps = 100;
    std::optional<State> force_x1;
    std::vector<double> sample_times;
    double check_box_radius = 50.0;
    std::size_t check_samples = 4096;
    ConditionMode check_mode = ConditionMode::Stability;
    std::size_t dump_paths = 0; // per-path trajectory CSVs in stability/explode modes
    bool svg = false;
    std::string out_dir = "out";

    std::string canonical;
    std::string config_hash;

    StepController controller(double delta) const;
};

struct CliOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
};

/// Parses and validates a config document. Throws ConfigError (or an
/// expression error with byte offset) on any defect; nothing is simulated
/// until validation passes.
RunConfig load_config(const std::string& json_text, RunMode mode, const CliOverrides& overrides);
RunConfig load_config_file(const std::string& path, RunMode mode, const CliOverrides& overrides);

} // namespace sdde
