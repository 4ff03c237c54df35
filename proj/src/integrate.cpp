#include "sdde/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace sdde {

namespace {

bool exploded_state(std::span<const double> x) {
    if (!all_finite(x)) return true;
    return norm2(x) > kExplosionThreshold;
}

struct Workspace {
    State y;
    State f;
    std::vector<double> g;
    State dw;
    State partial;
    State obs_state;

    Workspace(std::size_t m, std::size_t d)
        : y(m), f(m), g(m * d), dw(d), partial(d), obs_state(m) {}
};

} // namespace

AdaptiveStepResult adaptive_em_step(const DelaySystem& sys, const StepController& ctrl,
                                    HistoryBuffer& hist, double t, std::span<const double> x,
                                    WienerSource& noise) {
    const auto m = static_cast<std::size_t>(sys.state_dim());
    const auto d = static_cast<std::size_t>(sys.noise_dim());
    AdaptiveStepResult r;
    r.h = propose_step(ctrl, x);
    r.t_next = t + r.h;
    State y(m), f(m);
    std::vector<double> g(m * d);
    hist.delayed_into(t, sys.tau(), y);
    sys.drift_into(x, y, f);
    sys.diffusion_into(x, y, g);
    if (!all_finite(f) || !all_finite(g))
        throw CoefficientOverflow("coefficients left the representable range");
    r.dw.resize(d);
    noise.increment_into(t, r.t_next, r.dw);
    r.x_next.assign(x.begin(), x.end());
    axpy(r.h, f, r.x_next);
    add_matvec(g, m, d, r.dw, r.x_next);
    hist.append(r.t_next, r.x_next);
    return r;
}

namespace {

/// Shared driver for the plain and clamped schemes. clamp_radius <= 0 means
/// no clamping.
AdaptiveTrajectory run_adaptive(const DelaySystem& sys, const StepController& ctrl,
                                const InitialSegment& xi, WienerSource& noise, double T,
                                double clamp_radius, const IntegrateOptions& opts) {
    const auto m = static_cast<std::size_t>(sys.state_dim());
    const auto d = static_cast<std::size_t>(sys.noise_dim());
    if (xi.state_dim() != sys.state_dim())
        throw DomainError("segment dimension does not match the system");
    if (std::abs(xi.tau() - sys.tau()) > 1e-12 * std::max(1.0, sys.tau()))
        throw DomainError("segment delay does not match the system");
    if (!(T > 0.0))
        throw DomainError("horizon must be positive");

    AdaptiveTrajectory traj;
    traj.state_dim = sys.state_dim();

    HistoryBuffer hist(xi, opts.prune_history, sys.tau() + ctrl.h_max);
    Workspace w(m, d);

    State x(m);
    xi.value_into(0.0, x);
    double t = 0.0;
    hist.append(t, x);
    traj.sup_abs_nodes = norm2(x);

    std::size_t next_obs = 0;
    const auto& obs = opts.observe_times;
    while (next_obs < obs.size() && obs[next_obs] <= 0.0) {
        traj.obs_times.push_back(obs[next_obs]);
        traj.obs_states.insert(traj.obs_states.end(), x.begin(), x.end());
        ++next_obs;
    }

    std::vector<double> steps;
    auto finish = [&](TrajectoryStatus status, std::size_t exploded_step) {
        traj.status = status;
        traj.exploded_step = exploded_step;
        traj.steps_taken = steps.size();
        traj.final_time = hist.last_time();
        auto last = hist.last_state();
        traj.final_state.assign(last.begin(), last.end());
        traj.steps = std::move(steps);
        if (opts.record_path && !opts.prune_history) {
            traj.times = hist.take_times();
            traj.states = hist.take_states();
        }
        return traj;
    };

    while (t < T) {
        if (steps.size() >= ctrl.max_steps)
            return finish(TrajectoryStatus::MaxStepsExceeded, 0);

        const double h = propose_step(ctrl, x);
        const double t_next = t + h;

        hist.delayed_into(t, sys.tau(), w.y);
        sys.drift_into(x, w.y, w.f);
        sys.diffusion_into(x, w.y, w.g);
        if (!all_finite(w.f) || !all_finite(w.g))
            return finish(TrajectoryStatus::Exploded, steps.size());

        // Wiener increment over the step, split at observation times so the
        // interpolant can be evaluated with the same frozen coefficients.
        std::fill(w.dw.begin(), w.dw.end(), 0.0);
        double cursor = t;
        while (next_obs < obs.size() && obs[next_obs] <= t_next && obs[next_obs] <= T) {
            const double s = obs[next_obs];
            noise.increment_into(cursor, s, w.partial);
            for (std::size_t k = 0; k < d; ++k) w.dw[k] += w.partial[k];
            cursor = s;
            w.obs_state.assign(x.begin(), x.end());
            axpy(s - t, w.f, w.obs_state);
            add_matvec(w.g, m, d, w.dw, w.obs_state);
            traj.obs_times.push_back(s);
            traj.obs_states.insert(traj.obs_states.end(), w.obs_state.begin(),
                                   w.obs_state.end());
            ++next_obs;
        }
        noise.increment_into(cursor, t_next, w.partial);
        for (std::size_t k = 0; k < d; ++k) w.dw[k] += w.partial[k];

        State x_next(x);
        axpy(h, w.f, x_next);
        add_matvec(w.g, m, d, w.dw, x_next);
        if (clamp_radius > 0.0)
            x_next = clamp_phi(x_next, clamp_radius);

        steps.push_back(h);
        hist.append(t_next, x_next);
        traj.sup_abs_nodes = std::max(traj.sup_abs_nodes, norm2(x_next));
        if (exploded_state(x_next))
            return finish(TrajectoryStatus::Exploded, steps.size() - 1);

        x = std::move(x_next);
        t = t_next;
    }
    return finish(TrajectoryStatus::ReachedHorizon, 0);
}

} // namespace

AdaptiveTrajectory integrate_adaptive(const DelaySystem& sys, const StepController& ctrl,
                                      const InitialSegment& xi, WienerSource& noise, double T,
                                      const IntegrateOptions& opts) {
    return run_adaptive(sys, ctrl, xi, noise, T, 0.0, opts);
}

State clamp_phi(std::span<const double> x, double K) {
    if (!(K > 0.0))
        throw DomainError("clamp radius must be positive");
    State out(x.begin(), x.end());
    const double r = norm2(x);
    if (r > K) {
        const double scale = K / r;
        for (double& v : out) v *= scale;
    }
    return out;
}

AdaptiveTrajectory integrate_clamped(const DelaySystem& sys, const StepController& ctrl,
                                     const InitialSegment& xi, WienerSource& noise, double T,
                                     double K, const IntegrateOptions& opts) {
    if (!(K > xi.sup_norm()))
        throw InvalidClampBound("clamp radius must exceed sup|xi|");
    return run_adaptive(sys, ctrl, xi, noise, T, K, opts);
}

FixedTrajectory integrate_fixed_em(const DelaySystem& sys, double dt, const InitialSegment& xi,
                                   WienerSource& noise, double T, const FixedOptions& opts) {
    const auto m = static_cast<std::size_t>(sys.state_dim());
    const auto d = static_cast<std::size_t>(sys.noise_dim());
    if (!(dt > 0.0))
        throw DomainError("step size must be positive");
    if (xi.state_dim() != sys.state_dim())
        throw DomainError("segment dimension does not match the system");

    const double lag_real = sys.tau() / dt;
    const auto lag = static_cast<std::size_t>(std::llround(lag_real));
    if (lag < 1 || std::abs(lag_real - static_cast<double>(lag)) > 1e-9 * lag_real)
        throw NonCommensurateDelay("tau must be an integer multiple of dt");

    std::size_t n_steps = opts.n_steps;
    if (n_steps == 0) {
        if (!(T > 0.0))
            throw DomainError("horizon must be positive");
        n_steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    }

    FixedTrajectory traj;
    traj.state_dim = sys.state_dim();
    traj.noise_dim = sys.noise_dim();
    traj.dt = dt;
    traj.states.reserve((n_steps + 1) * m);
    traj.increments.reserve(n_steps * d);

    State x(m), y(m), f(m), dw(d);
    std::vector<double> g(m * d);
    xi.value_into(0.0, x);
    traj.states.insert(traj.states.end(), x.begin(), x.end());

    for (std::size_t k = 0; k < n_steps; ++k) {
        if (k >= lag) {
            const double* src = traj.states.data() + (k - lag) * m;
            std::copy(src, src + m, y.begin());
        } else {
            xi.value_into(static_cast<double>(k) * dt - sys.tau(), y);
        }
        sys.drift_into(x, y, f);
        sys.diffusion_into(x, y, g);
        if (!all_finite(f) || !all_finite(g)) {
            traj.status = TrajectoryStatus::Exploded;
            traj.exploded_step = k;
            traj.steps_taken = k;
            return traj;
        }
        noise.increment_into(static_cast<double>(k) * dt, static_cast<double>(k + 1) * dt, dw);
        traj.increments.insert(traj.increments.end(), dw.begin(), dw.end());
        axpy(dt, f, x);
        add_matvec(g, m, d, dw, x);
        if (k == 0 && opts.force_first_state)
            x = *opts.force_first_state;
        traj.states.insert(traj.states.end(), x.begin(), x.end());
        if (exploded_state(x)) {
            traj.status = TrajectoryStatus::Exploded;
            traj.exploded_step = k + 1;
            traj.steps_taken = k + 1;
            return traj;
        }
    }
    traj.status = TrajectoryStatus::ReachedHorizon;
    traj.steps_taken = n_steps;
    return traj;
}

namespace {

/// Step-process value over recorded trajectory arrays (xi below zero).
void trajectory_step_value(const AdaptiveTrajectory& traj, const InitialSegment& xi, double s,
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

} // namespace

State interpolate(const AdaptiveTrajectory& traj, const DelaySystem& sys,
                  const InitialSegment& xi, BridgedWiener& noise, double t) {
    if (traj.times.empty())
        throw DomainError("interpolation needs a recorded trajectory");
    if (t < traj.times.front() || t > traj.times.back())
        throw DomainError("interpolation time outside [0, t_N]");

    const auto m = static_cast<std::size_t>(sys.state_dim());
    const auto d = static_cast<std::size_t>(sys.noise_dim());

    auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
    auto idx = static_cast<std::size_t>(std::distance(traj.times.begin(), it)) - 1;
    if (traj.times[idx] == t) {
        auto src = traj.state_at(idx);
        return State(src.begin(), src.end());
    }

    const double t_under = traj.times[idx];
    auto x_under = traj.state_at(idx);
    State y(m), f(m), dw(d);
    std::vector<double> g(m * d);
    trajectory_step_value(traj, xi, t_under - sys.tau(), y);
    sys.drift_into(x_under, y, f);
    sys.diffusion_into(x_under, y, g);
    noise.increment_into(t_under, t, dw);

    State out(x_under.begin(), x_under.end());
    axpy(t - t_under, f, out);
    add_matvec(g, m, d, dw, out);
    return out;
}

} // namespace sdde
