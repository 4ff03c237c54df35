#pragma once

#include "sdde/config.hpp"

namespace sdde {

/// Executes the configured experiment, writing CSV reports, the resolved
/// config, and a replay manifest under cfg.out_dir. Returns the process
/// exit code (0 also covers a failed condition check: that outcome is a
/// report, not an error).
int run_experiment(const RunConfig& cfg);

} // namespace sdde
