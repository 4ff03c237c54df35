#include "sdde/problems.hpp"

#include <cmath>
#include <numbers>

namespace sdde {

namespace {

State constant_state(double c) { return State{c}; }

} // namespace

Problem counterexample_problem() {
    DelaySystem sys(
        1, 1, 1.0,
        [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            const double v = x[0];
            out[0] = -2.0 * v - v * v * v + 0.5 * v * std::sin(y[0]);
        },
        [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            out[0] = std::sqrt(2.0) * x[0] * std::cos(y[0]);
        });
    InitialSegment xi = InitialSegment::constant(constant_state(100.0), 1.0);
    auto majorant = [](std::span<const double> x) {
        const double r = std::fabs(x[0]);
        return 2.0 * r + r * r * r + 0.5 * r;
    };
    return Problem{
        "counterexample-sdde",
        std::move(sys),
        std::move(xi),
        [majorant](double delta, double horizon) {
            return indicator_controller(delta, majorant, horizon, 0.04);
        },
        GrowthConstants::stability(0.3, 0.0, 1.0),
        ConditionMode::Stability,
    };
}

Problem linear_problem() {
    DelaySystem sys(
        1, 1, 1.0,
        [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            out[0] = -4.0 * x[0] + y[0];
        },
        [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            out[0] = 0.5 * x[0] + 0.2 * y[0];
        });
    // Weierstrass-type history, Hoelder exponent 1/2: the delayed-argument
    // quantization then carries the same regularity as the driving noise,
    // which is the regime where the square-root convergence rate is sharp.
    InitialSegment xi(
        [](double theta, std::span<double> out) {
            double v = 2.0;
            for (int k = 0; k < 16; ++k)
                v += 2.0 * std::pow(2.0, -0.5 * k) *
                     std::cos(std::pow(2.0, k) * std::numbers::pi * theta + 0.7 * k);
            out[0] = v;
        },
        1.0, 1, 16.0, 0.5);
    // Indicator step rule at the linear drift scale: 4 max(1,|x|) stands in
    // for the drift magnitude, so the rule is delta/25 near the origin and
    // exactly delta/64 outside the unit ball.
    auto drift_scale = [](std::span<const double> x) { return 4.0 * std::max(1.0, norm2(x)); };
    return Problem{
        "linear-sdde",
        std::move(sys),
        std::move(xi),
        [drift_scale](double delta, double horizon) {
            return indicator_controller(delta, drift_scale, horizon, 0.04);
        },
        GrowthConstants::finite(13.0, 1.0),
        ConditionMode::Finite,
    };
}

Problem dissipative_sde_problem() {
    DelaySystem sys(
        1, 1, 1.0,
        [](std::span<const double> x, std::span<const double>, std::span<double> out) {
            out[0] = -x[0] - x[0] * x[0] * x[0];
        },
        [](std::span<const double> x, std::span<const double>, std::span<double> out) {
            out[0] = x[0];
        });
    InitialSegment xi = InitialSegment::constant(constant_state(2.0), 1.0);
    auto majorant = [](std::span<const double> x) {
        const double r = std::fabs(x[0]);
        return r + r * r * r;
    };
    return Problem{
        "dissipative-sde",
        std::move(sys),
        std::move(xi),
        [majorant](double delta, double horizon) {
            return indicator_controller(delta, majorant, horizon, 0.0625);
        },
        GrowthConstants::stability(0.375, 0.0, 1.0),
        ConditionMode::Stability,
    };
}

Problem builtin_problem(const std::string& name) {
    if (name == "counterexample-sdde") return counterexample_problem();
    if (name == "linear-sdde") return linear_problem();
    if (name == "dissipative-sde") return dissipative_sde_problem();
    throw DomainError("unknown builtin problem: " + name);
}

} // namespace sdde
