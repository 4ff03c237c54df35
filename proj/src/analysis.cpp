#include "sdde/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

namespace sdde {

int resolve_thread_count(int requested) {
    int n = requested;
    if (n <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n = hw == 0 ? 1 : static_cast<int>(hw);
    }
    if (const char* env = std::getenv("SDDE_LAB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return std::max(1, n);
}

void parallel_for_paths(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    threads = resolve_thread_count(threads);
    if (threads == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    pool.reserve(count);
    for (std::size_t k = 0; k < count; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

namespace {

constexpr std::uint64_t kValidationTag = 0x52454656u; // reference-validation substream

double max_h(const std::vector<StepController>& controllers) {
    double h = 0.0;
    for (const auto& c : controllers) h = std::max(h, c.h_max);
    return h;
}

struct PathOutcome {
    std::vector<double> err_p;  // per delta; NaN marks an exploded path
    double min_step = std::numeric_limits<double>::infinity();
};

// step-process lookup over a recorded trajectory
void hist_value(const AdaptiveTrajectory& traj, const InitialSegment& xi, double s,
                std::span<double> out) {
    if (s < 0.0) {
        xi.value_into(s, out);
        return;
    }
    auto it = std::upper_bound(traj.times.begin(), traj.times.end(), s);
    const auto idx = static_cast<std::size_t>(std::distance(traj.times.begin(), it)) - 1;
    auto src = traj.state_at(idx);
    std::copy(src.begin(), src.end(), out.begin());
}

/// sup over the reference grid (restricted to [0, T]) of the distance
/// between the adaptive interpolant and the reference states, segment by
/// segment so coefficients are evaluated once per adaptive step.
double sup_error_on_grid(const AdaptiveTrajectory& adaptive, const FixedTrajectory& ref,
                         const DelaySystem& sys, const InitialSegment& xi, FinePath& fine,
                         NoiseStream& stream, double T) {
    const auto m = static_cast<std::size_t>(sys.state_dim());
    const auto d = static_cast<std::size_t>(sys.noise_dim());
    const double dt = ref.dt;
    const auto last_j = std::min<std::size_t>(
        ref.steps_taken, static_cast<std::size_t>(std::floor(T / dt + 1e-9)));

    State y(m), f(m), w_node(d), w_grid(d), value(m), diff(m);
    std::vector<double> g(m * d);

    double sup = 0.0;
    std::size_t j = 0;
    for (std::size_t n = 0; n + 1 < adaptive.times.size() && j <= last_j; ++n) {
        const double t0 = adaptive.times[n];
        const double t1 = adaptive.times[n + 1];
        if (static_cast<double>(j) * dt >= t1) continue;

        auto x0 = adaptive.state_at(n);
        hist_value(adaptive, xi, t0 - sys.tau(), y);
        sys.drift_into(x0, y, f);
        sys.diffusion_into(x0, y, g);
        fine.sample_into(stream, t0, w_node);

        for (; j <= last_j; ++j) {
            const double s = static_cast<double>(j) * dt;
            if (s >= t1 && n + 2 < adaptive.times.size()) break;
            if (s < t0) continue; // cannot happen on a well-formed grid
            std::copy(fine.grid_value(j).begin(), fine.grid_value(j).end(), w_grid.begin());
            value.assign(x0.begin(), x0.end());
            axpy(s - t0, f, value);
            for (std::size_t r = 0; r < m; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < d; ++c)
                    acc += g[r * d + c] * (w_grid[c] - w_node[c]);
                value[r] += acc;
            }
            auto rj = ref.state_at(j);
            for (std::size_t r = 0; r < m; ++r) diff[r] = value[r] - rj[r];
            sup = std::max(sup, norm2(diff));
        }
    }
    return sup;
}

} // namespace

StrongErrorResult estimate_strong_error(const DelaySystem& sys,
                                        const std::vector<StepController>& controllers,
                                        const InitialSegment& xi, double p,
                                        std::size_t n_paths, double dt_ref, double T,
                                        std::uint64_t master_seed, int threads,
                                        bool validate_reference) {
    if (controllers.empty())
        throw DomainError("need at least one step controller");
    if (n_paths < 2)
        throw DomainError("need at least two paths");
    if (!(p > 0.0))
        throw DomainError("moment order must be positive");

    const auto d = sys.noise_dim();
    const double slack = max_h(controllers);

    StrongErrorResult result;
    int halvings = 0;

    for (;;) {
        // main estimate at the current dt_ref
        const double lag_real = sys.tau() / dt_ref;
        if (std::abs(lag_real - std::llround(lag_real)) > 1e-9 * lag_real)
            throw NonCommensurateDelay("tau must be an integer multiple of dt_ref");

        std::vector<PathOutcome> outcomes(n_paths);
        parallel_for_paths(n_paths, threads, [&](std::size_t i) {
            PathOutcome out;
            out.err_p.assign(controllers.size(), std::numeric_limits<double>::quiet_NaN());
            NoiseStream stream(master_seed, i, d);
            FinePath fine(stream, dt_ref, T + slack);
            BridgedWiener noise(fine, stream);
            FixedTrajectory ref = integrate_fixed_em(sys, dt_ref, xi, noise, T);
            if (ref.status == TrajectoryStatus::ReachedHorizon) {
                for (std::size_t c = 0; c < controllers.size(); ++c) {
                    AdaptiveTrajectory adaptive =
                        integrate_adaptive(sys, controllers[c], xi, noise, T);
                    for (double h : adaptive.steps) out.min_step = std::min(out.min_step, h);
                    if (adaptive.status != TrajectoryStatus::ReachedHorizon) continue;
                    const double sup =
                        sup_error_on_grid(adaptive, ref, sys, xi, fine, stream, T);
                    out.err_p[c] = std::pow(sup, p);
                }
            }
            outcomes[i] = std::move(out);
        });

        result.points.clear();
        result.min_adaptive_step = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < controllers.size(); ++c) {
            std::vector<double> ok;
            ok.reserve(n_paths);
            std::size_t failed = 0;
            for (std::size_t i = 0; i < n_paths; ++i) {
                const double v = outcomes[i].err_p[c];
                if (std::isnan(v))
                    ++failed;
                else
                    ok.push_back(v);
            }
            const MeanSE ms = mean_se(ok);
            StrongErrorPoint pt;
            pt.delta = controllers[c].delta;
            pt.mean_err_p = ms.mean;
            pt.se_err_p = ms.se;
            pt.rms = ms.n ? std::pow(ms.mean, 1.0 / p) : 0.0;
            pt.n_ok = ms.n;
            pt.n_failed = failed;
            result.points.push_back(pt);
        }
        for (const auto& o : outcomes)
            result.min_adaptive_step = std::min(result.min_adaptive_step, o.min_step);
        result.dt_ref_precondition_ok = dt_ref <= result.min_adaptive_step / 8.0;

        double smallest_rms = std::numeric_limits<double>::infinity();
        for (const auto& pt : result.points)
            if (pt.n_ok > 0) smallest_rms = std::min(smallest_rms, pt.rms);

        if (!validate_reference) {
            result.validation.dt_ref_used = dt_ref;
            result.validation.smallest_rms = smallest_rms;
            result.validation.ok = true;
            result.validation.halvings = halvings;
            break;
        }

        // coupled self-difference of the reference at dt_ref vs dt_ref / 2
        const std::size_t v_paths = std::min<std::size_t>(n_paths, 32);
        std::vector<double> self_p(v_paths, 0.0);
        const std::uint64_t vseed = substream_seed(master_seed, kValidationTag);
        parallel_for_paths(v_paths, threads, [&](std::size_t i) {
            NoiseStream stream(vseed, i, d);
            FinePath fine(stream, dt_ref / 2.0, T + slack);
            BridgedWiener noise(fine, stream);
            FixedTrajectory coarse = integrate_fixed_em(sys, dt_ref, xi, noise, T);
            FixedTrajectory finer = integrate_fixed_em(sys, dt_ref / 2.0, xi, noise, T);
            if (coarse.status != TrajectoryStatus::ReachedHorizon ||
                finer.status != TrajectoryStatus::ReachedHorizon) {
                self_p[i] = std::numeric_limits<double>::quiet_NaN();
                return;
            }
            const auto m = static_cast<std::size_t>(sys.state_dim());
            State diff(m);
            double sup = 0.0;
            for (std::size_t k = 0; k <= coarse.steps_taken; ++k) {
                auto a = coarse.state_at(k);
                auto b = finer.state_at(2 * k);
                for (std::size_t r = 0; r < m; ++r) diff[r] = a[r] - b[r];
                sup = std::max(sup, norm2(diff));
            }
            self_p[i] = std::pow(sup, p);
        });
        std::vector<double> valid;
        for (double v : self_p)
            if (!std::isnan(v)) valid.push_back(v);
        const MeanSE vms = mean_se(valid);
        result.validation.dt_ref_used = dt_ref;
        result.validation.paths = vms.n;
        result.validation.self_rms = vms.n ? std::pow(vms.mean, 1.0 / p) : 0.0;
        result.validation.smallest_rms = smallest_rms;
        result.validation.halvings = halvings;
        result.validation.ok =
            result.validation.self_rms < 0.1 * smallest_rms ||
            (smallest_rms == 0.0 && result.validation.self_rms == 0.0);

        if (result.validation.ok || halvings >= 8)
            break;
        dt_ref /= 2.0;
        ++halvings;
    }
    return result;
}

OrderFit fit_order(std::span<const std::pair<double, double>> delta_error_pairs, double p) {
    if (delta_error_pairs.size() < 2)
        throw DegenerateFit("need at least two (delta, error) pairs");
    std::vector<double> xs, ys;
    xs.reserve(delta_error_pairs.size());
    ys.reserve(delta_error_pairs.size());
    for (const auto& [delta, err] : delta_error_pairs) {
        if (!(delta > 0.0) || !(err > 0.0))
            throw DegenerateFit("deltas and errors must be positive");
        xs.push_back(std::log2(delta));
        ys.push_back(std::log2(std::pow(err, 1.0 / p)));
    }
    const LinearFit fit = least_squares(xs, ys);
    return {fit.slope, fit.intercept, fit.r2};
}

MomentCurve estimate_sup_moment(const DelaySystem& sys, const StepController& ctrl,
                                const InitialSegment& xi, double p, std::size_t n_paths,
                                double T, std::span<const double> sample_times,
                                std::uint64_t master_seed, int threads) {
    if (n_paths < 2)
        throw DomainError("need at least two paths");
    for (double s : sample_times)
        if (s < 0.0 || s > T)
            throw DomainError("sample times must lie in [0, T]");

    IntegrateOptions opts;
    opts.record_path = false;
    opts.prune_history = true;
    opts.observe_times.assign(sample_times.begin(), sample_times.end());
    std::sort(opts.observe_times.begin(), opts.observe_times.end());

    const std::size_t n_times = opts.observe_times.size();
    struct Row {
        std::vector<double> abs_p; // per sample time
        double sup_p = 0.0;
        bool ok = false;
    };
    std::vector<Row> rows(n_paths);
    parallel_for_paths(n_paths, threads, [&](std::size_t i) {
        ForwardWiener noise(NoiseStream(master_seed, i, sys.noise_dim()));
        AdaptiveTrajectory traj = integrate_adaptive(sys, ctrl, xi, noise, T, opts);
        Row row;
        if (traj.status == TrajectoryStatus::ReachedHorizon) {
            row.ok = true;
            row.sup_p = std::pow(traj.sup_abs_nodes, p);
            row.abs_p.resize(n_times);
            const auto m = static_cast<std::size_t>(sys.state_dim());
            for (std::size_t k = 0; k < n_times; ++k) {
                auto x = std::span<const double>(traj.obs_states.data() + k * m, m);
                row.abs_p[k] = std::pow(norm2(x), p);
            }
        }
        rows[i] = std::move(row);
    });

    MomentCurve curve;
    std::vector<double> column;
    column.reserve(n_paths);
    for (std::size_t k = 0; k < n_times; ++k) {
        column.clear();
        for (const auto& row : rows)
            if (row.ok) column.push_back(row.abs_p[k]);
        const MeanSE ms = mean_se(column);
        curve.points.push_back({opts.observe_times[k], ms.mean, ms.se, ms.n});
    }
    column.clear();
    for (const auto& row : rows)
        if (row.ok) column.push_back(row.sup_p);
    const MeanSE sup = mean_se(column);
    curve.sup_moment = {T, sup.mean, sup.se, sup.n};
    curve.n_ok = sup.n;
    curve.n_failed = n_paths - sup.n;
    return curve;
}

LyapunovEstimate estimate_lyapunov(const AdaptiveTrajectory& traj, double tail_fraction) {
    if (traj.status == TrajectoryStatus::Exploded)
        throw ExplodedTrajectory("cannot estimate a decay rate on an exploded path");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
        throw DomainError("tail fraction must lie in (0, 1]");
    const std::size_t n = traj.times.size();
    if (n == 0)
        throw DomainError("trajectory has no recorded nodes");

    const auto start = static_cast<std::size_t>(
        std::floor(static_cast<double>(n - 1) * (1.0 - tail_fraction)));
    if (n - start < 10)
        throw InsufficientTail("need at least 10 grid points in the tail window");

    std::vector<double> ts, logs;
    ts.reserve(n - start);
    logs.reserve(n - start);
    for (std::size_t i = start; i < n; ++i) {
        ts.push_back(traj.times[i]);
        logs.push_back(std::log(std::max(norm2(traj.state_at(i)), 1e-300)));
    }
    LyapunovEstimate est;
    est.slope = least_squares(ts, logs).slope;
    const double tN = traj.times.back();
    est.endpoint = tN > 0.0 ? logs.back() / tN : 0.0;
    return est;
}

AuditReport geometric_growth_audit(const FixedTrajectory& traj, double dt) {
    AuditReport report;
    const double root_dt = std::sqrt(dt);
    for (std::size_t k = 0; k < traj.steps_taken; ++k) {
        const double threshold = std::ldexp(1.0, static_cast<int>(k) + 3) / root_dt;
        if (!(norm2(traj.state_at(k)) >= threshold)) continue;
        if (!(norm2(traj.increment_at(k)) <= std::ldexp(1.0, static_cast<int>(k)))) continue;
        ++report.pairs_checked;
        const double conclusion = std::ldexp(1.0, static_cast<int>(k) + 4) / root_dt;
        const double next = norm2(traj.state_at(k + 1));
        if (!(next >= conclusion) && std::isfinite(conclusion))
            ++report.violations;
    }
    return report;
}

ExplosionStats explosion_probability(const DelaySystem& sys, double dt,
                                     const InitialSegment& xi, std::size_t n_paths,
                                     std::size_t k_steps, std::uint64_t master_seed,
                                     int threads, const std::optional<State>& force_x1) {
    if (n_paths < 100)
        throw DomainError("explosion estimation needs at least 100 paths");
    std::vector<std::uint8_t> exploded(n_paths, 0);
    std::vector<AuditReport> audits(n_paths);
    FixedOptions opts;
    opts.n_steps = k_steps;
    opts.force_first_state = force_x1;
    parallel_for_paths(n_paths, threads, [&](std::size_t i) {
        ForwardWiener noise(NoiseStream(master_seed, i, sys.noise_dim()));
        FixedTrajectory traj = integrate_fixed_em(sys, dt, xi, noise, 0.0, opts);
        exploded[i] = traj.status == TrajectoryStatus::Exploded ? 1 : 0;
        audits[i] = geometric_growth_audit(traj, dt);
    });
    ExplosionStats stats;
    stats.paths = n_paths;
    for (std::size_t i = 0; i < n_paths; ++i) {
        stats.exploded += exploded[i];
        stats.audit.pairs_checked += audits[i].pairs_checked;
        stats.audit.violations += audits[i].violations;
    }
    const FractionCI ci = fraction_ci95(stats.exploded, stats.paths);
    stats.fraction = ci.fraction;
    stats.ci_lo = ci.lo;
    stats.ci_hi = ci.hi;
    return stats;
}

} // namespace sdde
