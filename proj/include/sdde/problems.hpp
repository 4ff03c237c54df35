#pragma once

#include <functional>
#include <string>

#include "sdde/condition.hpp"
#include "sdde/system.hpp"

namespace sdde {

/// A ready-to-run SDDE: system, history, a controller family indexed by
/// delta, and the constants its step condition is checked against.
struct Problem {
    std::string name;
    DelaySystem system;
    InitialSegment xi;
    std::function<StepController(double delta, double horizon)> make_controller;
    GrowthConstants constants;
    ConditionMode default_check_mode = ConditionMode::Stability;
};

/// Scalar SDDE with drift -2x - x^3 + x sin(y)/2 and diffusion
/// sqrt(2) x cos(y), tau = 1, xi == 100. The fixed-step EM solution blows up
/// with positive probability while the adaptive one decays pathwise; the
/// step rule uses the majorant F(x) = 2|x| + |x|^3 + |x|/2.
Problem counterexample_problem();

/// Scalar linear SDDE f = -4x + y, g = 0.5x + 0.2y, tau = 1, with a
/// Hoelder-1/2 (Weierstrass-type) history and the indicator step rule at the
/// linear drift scale (delta/25 inside the unit ball, delta/64 outside).
/// Used for the strong-order study.
Problem linear_problem();

/// Scalar SDE (no y dependence) f = -x - x^3, g = x with the indicator step
/// rule and majorant |x| + |x|^3; dissipative in the monotone sense.
Problem dissipative_sde_problem();

/// Lookup by config name; DomainError for unknown names.
Problem builtin_problem(const std::string& name);

} // namespace sdde
