#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "sdde/integrate.hpp"
#include "sdde/stats.hpp"

namespace sdde {

/// Worker count: `requested` <= 0 means hardware concurrency; the
/// SDDE_LAB_THREADS environment variable caps the result either way.
int resolve_thread_count(int requested);

/// Runs fn(path_index) for each index on a small pool. Work is self-seeded
/// per index and results land in per-index slots, so scheduling never shows
/// up in any statistic.
void parallel_for_paths(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct StrongErrorPoint {
    double delta = 0.0;
    double mean_err_p = 0.0; // Monte Carlo mean of sup-norm error^p
    double se_err_p = 0.0;
    double rms = 0.0;        // mean_err_p^(1/p)
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
};

struct ReferenceValidation {
    double dt_ref_used = 0.0;
    double self_rms = 0.0; // coupled fixed-EM self-difference at dt_ref vs dt_ref/2
    double smallest_rms = 0.0;
    int halvings = 0;
    bool ok = false;
    std::size_t paths = 0;
};

struct StrongErrorResult {
    std::vector<StrongErrorPoint> points;
    ReferenceValidation validation;
    double min_adaptive_step = 0.0;
    bool dt_ref_precondition_ok = true; // dt_ref <= min realized step / 8
};

/// Strong error of the adaptive scheme against a fixed-EM proxy on dt_ref,
/// both driven by one Wiener path per path index via bridge coupling. The
/// error per path is the sup over the reference grid of |X_adaptive - X_ref|
/// evaluated through the continuous interpolant, raised to the p-th power.
/// Exploded paths are counted per delta and excluded from the mean. When
/// validate_reference is set, dt_ref is halved (up to 8 times) until the
/// reference self-difference drops below 10% of the smallest measured error.
StrongErrorResult estimate_strong_error(const DelaySystem& sys,
                                        const std::vector<StepController>& controllers,
                                        const InitialSegment& xi, double p,
                                        std::size_t n_paths, double dt_ref, double T,
                                        std::uint64_t master_seed, int threads = 0,
                                        bool validate_reference = true);

struct OrderFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
};

/// Least squares of log2(error^(1/p)) against log2(delta).
OrderFit fit_order(std::span<const std::pair<double, double>> delta_error_pairs, double p);

struct MomentPoint {
    double time = 0.0;
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

struct MomentCurve {
    std::vector<MomentPoint> points; // E|X_t|^p at the sample times
    MomentPoint sup_moment;          // E[sup_n |X at t_n|^p] over the discrete grid
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
};

/// Monte Carlo moment curve via the interpolant at the sample times, plus
/// the discrete-grid sup moment. Long-horizon memory mode: only the delay
/// window of each path is retained.
MomentCurve estimate_sup_moment(const DelaySystem& sys, const StepController& ctrl,
                                const InitialSegment& xi, double p, std::size_t n_paths,
                                double T, std::span<const double> sample_times,
                                std::uint64_t master_seed, int threads = 0);

struct LyapunovEstimate {
    double slope = 0.0;    // least-squares slope of log|X| over the tail
    double endpoint = 0.0; // single-point log|X_N| / t_N
};

/// Tail fit of log|X at t_n| versus t_n over the final tail_fraction of the
/// grid. Zero states are floored at 1e-300 before the log.
LyapunovEstimate estimate_lyapunov(const AdaptiveTrajectory& traj, double tail_fraction);

struct AuditReport {
    std::size_t pairs_checked = 0; // steps where the hypothesis held
    std::size_t violations = 0;
};

/// Checks the geometric-growth implication along a fixed-EM path: whenever
/// |X_k| >= 2^(k+3)/sqrt(dt) and |dW_k| <= 2^k, asserts
/// |X_{k+1}| >= 2^(k+4)/sqrt(dt). Exact inequality, no tolerance.
AuditReport geometric_growth_audit(const FixedTrajectory& traj, double dt);

struct ExplosionStats {
    std::size_t paths = 0;
    std::size_t exploded = 0;
    double fraction = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    AuditReport audit;
};

/// Fraction of fixed-EM paths flagged Exploded within k_steps, with a 95%
/// normal-approximation interval; runs the growth audit on every path.
/// force_x1 overrides the state after the first step on every path.
ExplosionStats explosion_probability(const DelaySystem& sys, double dt,
                                     const InitialSegment& xi, std::size_t n_paths,
                                     std::size_t k_steps, std::uint64_t master_seed,
                                     int threads = 0,
                                     const std::optional<State>& force_x1 = std::nullopt);

} // namespace sdde
