#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sdde/history.hpp"
#include "sdde/noise.hpp"
#include "sdde/system.hpp"

namespace sdde {

enum class TrajectoryStatus { ReachedHorizon, MaxStepsExceeded, Exploded };

/// A state counts as exploded once any component is non-finite or its norm
/// passes this threshold (the square still fits in a double, so statistics
/// survive the last recorded value).
constexpr double kExplosionThreshold = 1e154;

struct AdaptiveTrajectory {
    int state_dim = 1;
    std::vector<double> times;  // t_0 .. t_N (empty when record_path = false)
    std::vector<double> steps;  // h_0 .. h_{N-1}, exactly t_{n+1} - t_n as stored
    std::vector<double> states; // (N+1) x m
    TrajectoryStatus status = TrajectoryStatus::ReachedHorizon;
    std::size_t steps_taken = 0;
    std::size_t exploded_step = 0;
    double final_time = 0.0;
    State final_state;
    double sup_abs_nodes = 0.0; // running max over nodes of |X-hat|
    // interpolant samples at the requested observation times (stops early on
    // explosion; obs_times holds the times actually reached)
    std::vector<double> obs_times;
    std::vector<double> obs_states;

    std::span<const double> state_at(std::size_t n) const {
        return {states.data() + n * static_cast<std::size_t>(state_dim),
                static_cast<std::size_t>(state_dim)};
    }
    std::size_t node_count() const { return times.size(); }
};

struct FixedTrajectory {
    int state_dim = 1;
    int noise_dim = 1;
    double dt = 0.0;
    std::vector<double> states;     // (K+1) x m
    std::vector<double> increments; // K x d
    TrajectoryStatus status = TrajectoryStatus::ReachedHorizon;
    std::size_t steps_taken = 0;
    std::size_t exploded_step = 0;

    std::span<const double> state_at(std::size_t k) const {
        return {states.data() + k * static_cast<std::size_t>(state_dim),
                static_cast<std::size_t>(state_dim)};
    }
    std::span<const double> increment_at(std::size_t k) const {
        return {increments.data() + k * static_cast<std::size_t>(noise_dim),
                static_cast<std::size_t>(noise_dim)};
    }
};

struct IntegrateOptions {
    bool record_path = true;
    bool prune_history = false;            // long-horizon memory mode
    std::vector<double> observe_times;     // nondecreasing, in [0, T]
};

struct AdaptiveStepResult {
    double t_next = 0.0;
    double h = 0.0;
    State x_next;
    State dw;
};

/// One step of the adaptive scheme: h = clamp(h(x)), y = step process at
/// t - tau, x' = x + f(x,y) h + g(x,y) dW. Appends the new node to hist.
/// Throws CoefficientOverflow when f or g leave the representable range.
AdaptiveStepResult adaptive_em_step(const DelaySystem& sys, const StepController& ctrl,
                                    HistoryBuffer& hist, double t, std::span<const double> x,
                                    WienerSource& noise);

/// Runs the recursion until t_n >= T, max_steps, or explosion. The final
/// step may overshoot T; the trajectory stores it as-is.
AdaptiveTrajectory integrate_adaptive(const DelaySystem& sys, const StepController& ctrl,
                                      const InitialSegment& xi, WienerSource& noise, double T,
                                      const IntegrateOptions& opts = {});

/// Radial clamp to the ball of radius K: x unchanged when |x| <= K.
State clamp_phi(std::span<const double> x, double K);

/// Adaptive scheme with the clamp applied after every step; every node
/// satisfies |X| <= K. Requires K > sup|xi| (InvalidClampBound otherwise).
AdaptiveTrajectory integrate_clamped(const DelaySystem& sys, const StepController& ctrl,
                                     const InitialSegment& xi, WienerSource& noise, double T,
                                     double K, const IntegrateOptions& opts = {});

struct FixedOptions {
    std::size_t n_steps = 0;                // 0: derive from T / dt
    std::optional<State> force_first_state; // override X_1 after the first step
};

/// Euler-Maruyama on the uniform grid {k dt}; the delayed argument is
/// X_{k - tau/dt}. Requires tau/dt integral to 1e-9 relative tolerance.
FixedTrajectory integrate_fixed_em(const DelaySystem& sys, double dt, const InitialSegment& xi,
                                   WienerSource& noise, double T, const FixedOptions& opts = {});

/// Continuous-time value between nodes: with t_under = max{t_n <= t},
///   X_t = X(t_under) + f(...)(t - t_under) + g(...)(W_t - W_t_under)
/// with both coefficient arguments frozen over the step. Needs bridge-capable
/// noise for off-node times. DomainError outside [0, t_N].
State interpolate(const AdaptiveTrajectory& traj, const DelaySystem& sys,
                  const InitialSegment& xi, BridgedWiener& noise, double t);

} // namespace sdde
