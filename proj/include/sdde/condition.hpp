#pragma once

#include <vector>

#include "sdde/system.hpp"

namespace sdde {

enum class ConditionMode { Finite, Infinite, Stability };

const char* condition_mode_name(ConditionMode mode);

/// Rectangle in (x, y) space; one [lo, hi] interval per component.
struct SampleBox {
    std::vector<double> x_lo, x_hi;
    std::vector<double> y_lo, y_hi;

    /// Symmetric box [-r, r]^m for both arguments.
    static SampleBox symmetric(int m, double r);
};

/// Result of sampling one of the step-size inequalities over a box.
/// margin = RHS - LHS, so pass means the worst margin is >= 0. A failed
/// condition is a report, not an error.
struct ConditionReport {
    ConditionMode mode = ConditionMode::Finite;
    bool pass = false;
    double worst_margin = 0.0;
    State worst_x;
    State worst_y;
    std::size_t samples = 0;
    // stability mode only: the h_max condition 2*a2*exp(2*a1*h_max) < a1
    bool hmax_checked = false;
    bool hmax_ok = false;
    double hmax_lhs = 0.0;
    double hmax_rhs = 0.0;
};

/// Samples the mode's inequality on a deterministic low-discrepancy grid
/// (Halton points plus the box corners and centre):
///   finite:    <x,f> + h(x)/2 |f|^2                     <= a (|x|^2+|y|^2) + b
///   infinite:  <x,f> + h(x)/2 |f|^2                     <= -a1|x|^2 + a2|y|^2 + b
///   stability: <x,f> + h(x)/2 |f|^2 + d/2 ||g||^2
///                 <= -a1|x|^2 + a2 min(h(y),h(x))/h(x) |y|^2
/// Stability mode also checks the h_max inequality analytically.
ConditionReport check_step_condition(const DelaySystem& sys, const StepController& ctrl,
                                     const GrowthConstants& constants, ConditionMode mode,
                                     const SampleBox& box, std::size_t n_samples);

} // namespace sdde
