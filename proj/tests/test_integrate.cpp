#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "sdde/integrate.hpp"
#include "sdde/kahan.hpp"
#include "sdde/problems.hpp"

using namespace sdde;

namespace {

DelaySystem zero_system() {
    return DelaySystem(
        1, 1, 1.0,
        [](std::span<const double>, std::span<const double>, std::span<double> out) {
            out[0] = 0.0;
        },
        [](std::span<const double>, std::span<const double>, std::span<double> out) {
            out[0] = 0.0;
        });
}

/// Wiener source delivering a fixed value for every positive-length query.
class FixedIncrementWiener : public WienerSource {
public:
    explicit FixedIncrementWiener(double value) : value_(value) {}
    int dim() const override { return 1; }
    void increment_into(double a, double b, std::span<double> out) override {
        out[0] = b > a ? value_ : 0.0;
    }

private:
    double value_;
};

/// Controller replaying a fixed list of step sizes.
StepController scripted_controller(std::vector<double> steps) {
    auto state = std::make_shared<std::pair<std::vector<double>, std::size_t>>(
        std::move(steps), 0);
    StepController ctrl;
    ctrl.h_min = 1e-15;
    ctrl.h_max = 1.0;
    ctrl.step_fn = [state](std::span<const double>) {
        const double h = state->first[std::min(state->second, state->first.size() - 1)];
        ++state->second;
        return h;
    };
    return ctrl;
}

} // namespace

TEST_CASE("delayed lookup: initial segment, left-closed grid intervals, domain") {
    InitialSegment theta_id(
        [](double theta, std::span<double> out) { out[0] = theta; }, 1.0, 1, 1.0, 1.0);
    HistoryBuffer hist(theta_id, false, 0.0);
    hist.append(0.0, State{10.0});
    hist.append(0.4, State{11.0});
    hist.append(0.9, State{12.0});

    // t - tau lands inside the initial segment
    CHECK(delayed_value(hist, 0.4, 1.0)[0] == -0.6);

    hist.append(1.3, State{13.0});
    // largest grid time <= 0.3 is t_0 = 0
    CHECK(delayed_value(hist, 1.3, 1.0)[0] == 10.0);

    CHECK_THROWS_AS(delayed_value(hist, -0.5, 1.0), DomainError);

    // boundary hit with dyadic-exact times: the interval is left-closed
    HistoryBuffer exact(theta_id, false, 0.0);
    exact.append(0.0, State{20.0});
    exact.append(0.25, State{21.0});
    exact.append(0.9, State{22.0});
    exact.append(1.25, State{23.0});
    CHECK(delayed_value(exact, 1.25, 1.0)[0] == 21.0);
}

TEST_CASE("binary search matches a linear-scan oracle on 1e4 random grids") {
    std::mt19937_64 rng(0xA11CE);
    InitialSegment xi = InitialSegment::constant(State{-99.0}, 1.0);
    for (int rep = 0; rep < 10000; ++rep) {
        HistoryBuffer hist(xi, false, 0.0);
        std::vector<double> times;
        std::vector<double> values;
        double t = 0.0;
        const int n = 1 + static_cast<int>(rng() % 50);
        for (int i = 0; i < n; ++i) {
            hist.append(t, State{static_cast<double>(i)});
            times.push_back(t);
            values.push_back(static_cast<double>(i));
            t += 1e-3 + (static_cast<double>(rng() % 1000) / 1000.0);
        }
        std::uniform_real_distribution<double> pick(0.0, times.back());
        const double s = pick(rng);
        // linear-scan oracle
        double expected = values[0];
        for (std::size_t i = 0; i < times.size(); ++i)
            if (times[i] <= s) expected = values[i];
        State out(1);
        hist.step_value_into(s, out);
        REQUIRE(out[0] == expected);
    }
}

TEST_CASE("one adaptive step reproduces the hand-computed update") {
    Problem prob = counterexample_problem();
    StepController ctrl = prob.make_controller(0.1, 20.0);
    InitialSegment xi = InitialSegment::constant(State{0.5}, 1.0);

    SUBCASE("zero noise") {
        HistoryBuffer hist(xi, false, 0.0);
        hist.append(0.0, State{0.5});
        FixedIncrementWiener noise(0.0);
        const AdaptiveStepResult r =
            adaptive_em_step(prob.system, ctrl, hist, 0.0, State{0.5}, noise);
        CHECK(r.h == doctest::Approx(0.004).epsilon(1e-12));
        CHECK(r.x_next[0] == doctest::Approx(0.495980).epsilon(1e-6));
        CHECK(hist.node_count() == 2);
        CHECK(hist.last_time() == r.t_next);
    }
    SUBCASE("fixed noise increment 0.01") {
        HistoryBuffer hist(xi, false, 0.0);
        hist.append(0.0, State{0.5});
        FixedIncrementWiener noise(0.01);
        const AdaptiveStepResult r =
            adaptive_em_step(prob.system, ctrl, hist, 0.0, State{0.5}, noise);
        // 0.495979 + g(0.5, 0.5) * 0.01 with g = 0.6205446
        CHECK(r.x_next[0] == doctest::Approx(0.5021849).epsilon(1e-6));
    }
    SUBCASE("zero coefficients keep the state and advance time") {
        DelaySystem sys = zero_system();
        InitialSegment one = InitialSegment::constant(State{1.0}, 1.0);
        HistoryBuffer hist(one, false, 0.0);
        hist.append(0.0, State{1.0});
        FixedIncrementWiener noise(0.37);
        StepController cc = constant_controller(0.25, 1.0);
        const AdaptiveStepResult r = adaptive_em_step(sys, cc, hist, 0.0, State{1.0}, noise);
        CHECK(r.x_next[0] == 1.0);
        CHECK(r.t_next == 0.25);
    }
    SUBCASE("overflowing coefficients raise CoefficientOverflow") {
        HistoryBuffer hist(xi, false, 0.0);
        hist.append(0.0, State{0.5});
        FixedIncrementWiener noise(0.0);
        CHECK_THROWS_AS(
            adaptive_em_step(prob.system, ctrl, hist, 0.0, State{1e120}, noise),
            CoefficientOverflow);
    }
}

TEST_CASE("trivial adaptive run: constant grid, constant state") {
    DelaySystem sys = zero_system();
    InitialSegment xi = InitialSegment::constant(State{3.0}, 1.0);
    ForwardWiener noise(NoiseStream(5, 0, 1));
    AdaptiveTrajectory traj =
        integrate_adaptive(sys, constant_controller(0.25, 1.0), xi, noise, 1.0);
    CHECK(traj.status == TrajectoryStatus::ReachedHorizon);
    CHECK(traj.times == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(traj.steps_taken == 4);
    for (std::size_t n = 0; n < traj.node_count(); ++n) CHECK(traj.state_at(n)[0] == 3.0);
    CHECK(traj.sup_abs_nodes == 3.0);
}

TEST_CASE("max_steps guard trips instead of looping") {
    DelaySystem sys = zero_system();
    InitialSegment xi = InitialSegment::constant(State{1.0}, 1.0);
    StepController ctrl;
    ctrl.step_fn = [](std::span<const double>) { return 1e-12; };
    ctrl.h_min = 1e-12;
    ctrl.h_max = 1e-12;
    ctrl.max_steps = 10;
    ForwardWiener noise(NoiseStream(5, 1, 1));
    AdaptiveTrajectory traj = integrate_adaptive(sys, ctrl, xi, noise, 1.0);
    CHECK(traj.status == TrajectoryStatus::MaxStepsExceeded);
    CHECK(traj.steps_taken == 10);
}

TEST_CASE("grid bookkeeping: stored steps reproduce node times exactly") {
    Problem prob = counterexample_problem();
    ForwardWiener noise(NoiseStream(17, 2, 1));
    AdaptiveTrajectory traj =
        integrate_adaptive(prob.system, prob.make_controller(0.1, 2.0), prob.xi, noise, 2.0);
    REQUIRE(traj.status == TrajectoryStatus::ReachedHorizon);
    REQUIRE(traj.times.size() == traj.steps.size() + 1);
    for (std::size_t n = 0; n + 1 < traj.times.size(); ++n)
        REQUIRE(traj.times[n + 1] == traj.times[n] + traj.steps[n]); // bitwise
    KahanSum sum;
    for (double h : traj.steps) sum.add(h);
    CHECK(std::fabs(sum.value() - traj.final_time) < 1e-9);
    CHECK(traj.final_time >= 2.0);
    // overshoot is stored as-is: the last node may pass the horizon
    CHECK(traj.times[traj.times.size() - 2] < 2.0);
}

TEST_CASE("fixed EM: first step of the blow-up recursion, hand-computed") {
    Problem prob = counterexample_problem();
    FixedIncrementWiener noise(0.0);

    SUBCASE("dt = 2e-4") {
        FixedOptions opts;
        opts.n_steps = 1;
        FixedTrajectory traj =
            integrate_fixed_em(prob.system, 2e-4, prob.xi, noise, 0.0, opts);
        // X_1 = 100 + f(100,100) dt, f(100,100) = -200 - 1e6 + 50 sin(100)
        const double f = -200.0 - 1e6 + 50.0 * std::sin(100.0);
        CHECK(traj.state_at(1)[0] == doctest::Approx(100.0 + 2e-4 * f).epsilon(1e-12));
        CHECK(traj.state_at(1)[0] == doctest::Approx(-100.04506).epsilon(1e-6));
    }
    SUBCASE("dt = 2e-3") {
        FixedOptions opts;
        opts.n_steps = 1;
        FixedTrajectory traj =
            integrate_fixed_em(prob.system, 2e-3, prob.xi, noise, 0.0, opts);
        const double f = -200.0 - 1e6 + 50.0 * std::sin(100.0);
        CHECK(traj.state_at(1)[0] == doctest::Approx(100.0 + 2e-3 * f).epsilon(1e-12));
        CHECK(traj.state_at(1)[0] == doctest::Approx(-1900.4506).epsilon(1e-6));
    }
    SUBCASE("zero system stays constant") {
        DelaySystem sys = zero_system();
        InitialSegment xi = InitialSegment::constant(State{4.0}, 1.0);
        FixedTrajectory traj = integrate_fixed_em(sys, 0.25, xi, noise, 2.0);
        CHECK(traj.status == TrajectoryStatus::ReachedHorizon);
        CHECK(traj.steps_taken == 8);
        for (std::size_t k = 0; k <= 8; ++k) CHECK(traj.state_at(k)[0] == 4.0);
    }
    SUBCASE("non-commensurate delay is rejected") {
        CHECK_THROWS_AS(integrate_fixed_em(prob.system, 0.3, prob.xi, noise, 1.0),
                        NonCommensurateDelay);
    }
}

TEST_CASE("fixed EM blows up from the constant-100 history at dt = 2e-3") {
    Problem prob = counterexample_problem();
    ForwardWiener noise(NoiseStream(99, 0, 1));
    FixedOptions opts;
    opts.n_steps = 100;
    FixedTrajectory traj = integrate_fixed_em(prob.system, 2e-3, prob.xi, noise, 0.0, opts);
    CHECK(traj.status == TrajectoryStatus::Exploded);
    CHECK(traj.exploded_step < 20);
}

TEST_CASE("radial clamp") {
    const State projected = clamp_phi(State{3.0, 4.0}, 1.0);
    CHECK(projected[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(projected[1] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(norm2(projected) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(clamp_phi(State{0.3, -0.4}, 1.0) == State{0.3, -0.4});
    CHECK(clamp_phi(State{0.0, 0.0}, 5.0) == State{0.0, 0.0});
    CHECK_THROWS_AS(clamp_phi(State{1.0}, 0.0), DomainError);
}

TEST_CASE("clamped scheme") {
    Problem prob = counterexample_problem();

    SUBCASE("a clamp radius beyond the running sup never binds: bitwise equality") {
        ForwardWiener n1(NoiseStream(3141, 5, 1));
        AdaptiveTrajectory plain = integrate_adaptive(
            prob.system, prob.make_controller(0.1, 2.0), prob.xi, n1, 2.0);
        ForwardWiener n2(NoiseStream(3141, 5, 1));
        AdaptiveTrajectory clamped = integrate_clamped(
            prob.system, prob.make_controller(0.1, 2.0), prob.xi, n2, 2.0, 1e9);
        CHECK(plain.times == clamped.times);
        CHECK(plain.states == clamped.states);
        CHECK(plain.steps == clamped.steps);
    }
    SUBCASE("clamp bound must exceed sup|xi|") {
        ForwardWiener noise(NoiseStream(1, 1, 1));
        CHECK_THROWS_AS(integrate_clamped(prob.system, prob.make_controller(0.1, 1.0),
                                          prob.xi, noise, 1.0, 50.0),
                        InvalidClampBound);
    }
    SUBCASE("a blow-up-forcing step rule stays inside the ball of radius K") {
        // fixed-step-sized adaptive steps reproduce the unstable regime
        StepController big = constant_controller(2e-3, 0.5);
        big.h_min = 1e-12;
        ForwardWiener noise(NoiseStream(2025, 3, 1));
        AdaptiveTrajectory traj =
            integrate_clamped(prob.system, big, prob.xi, noise, 0.5, 1000.0);
        CHECK(traj.status == TrajectoryStatus::ReachedHorizon);
        double sup = 0.0;
        for (std::size_t n = 0; n < traj.node_count(); ++n)
            sup = std::max(sup, std::fabs(traj.state_at(n)[0]));
        CHECK(sup <= 1000.0 * (1.0 + 1e-12));
        CHECK(sup == doctest::Approx(1000.0)); // the clamp does bind here
    }
}

TEST_CASE("monotone clamp coupling: sup grows with the clamp radius") {
    Problem prob = counterexample_problem();

    SUBCASE("shared forward noise, fixed-size steps") {
        StepController big = constant_controller(2e-3, 0.2);
        int bound_somewhere = 0;
        for (std::uint64_t path = 0; path < 100; ++path) {
            ForwardWiener n1(NoiseStream(808, path, 1));
            AdaptiveTrajectory a =
                integrate_clamped(prob.system, big, prob.xi, n1, 0.2, 300.0);
            ForwardWiener n2(NoiseStream(808, path, 1));
            AdaptiveTrajectory b =
                integrate_clamped(prob.system, big, prob.xi, n2, 0.2, 800.0);
            CHECK(a.sup_abs_nodes <= b.sup_abs_nodes + 1e-12);
            if (a.sup_abs_nodes < b.sup_abs_nodes) ++bound_somewhere;
        }
        CHECK(bound_somewhere > 0); // the coupling is not vacuous
    }
    SUBCASE("bridged noise, state-dependent steps, diverging grids") {
        DelaySystem wide(
            1, 1, 1.0,
            [](std::span<const double>, std::span<const double>, std::span<double> out) {
                out[0] = 0.0;
            },
            [](std::span<const double> x, std::span<const double>, std::span<double> out) {
                out[0] = 2.0 * x[0];
            });
        InitialSegment one = InitialSegment::constant(State{1.0}, 1.0);
        StepController ctrl;
        ctrl.delta = 0.1;
        ctrl.h_max = 0.1;
        ctrl.horizon = 1.0;
        ctrl.step_fn = [](std::span<const double> x) {
            return 0.1 / std::max(1.0, norm2(x));
        };
        for (std::uint64_t path = 0; path < 100; ++path) {
            NoiseStream stream(909, path, 1);
            FinePath fine(stream, 0.015625, 1.2);
            BridgedWiener noise(fine, stream);
            AdaptiveTrajectory a = integrate_clamped(wide, ctrl, one, noise, 1.0, 2.0);
            AdaptiveTrajectory b = integrate_clamped(wide, ctrl, one, noise, 1.0, 3.0);
            CHECK(a.sup_abs_nodes <= b.sup_abs_nodes + 1e-12);
        }
    }
}

TEST_CASE("interpolation between nodes") {
    SUBCASE("node times return node states bitwise") {
        Problem prob = linear_problem();
        NoiseStream stream(11, 0, 1);
        FinePath fine(stream, 0.0078125, 2.5);
        BridgedWiener noise(fine, stream);
        AdaptiveTrajectory traj = integrate_adaptive(
            prob.system, prob.make_controller(0.25, 2.0), prob.xi, noise, 2.0);
        for (std::size_t n = 0; n < traj.node_count(); n += 3) {
            const State v = interpolate(traj, prob.system, prob.xi, noise, traj.times[n]);
            CHECK(v[0] == traj.state_at(n)[0]);
        }
        const State at_end =
            interpolate(traj, prob.system, prob.xi, noise, traj.times.back());
        CHECK(at_end[0] == traj.final_state[0]);
        CHECK_THROWS_AS(interpolate(traj, prob.system, prob.xi, noise, -0.1), DomainError);
        CHECK_THROWS_AS(
            interpolate(traj, prob.system, prob.xi, noise, traj.times.back() + 0.1),
            DomainError);
    }
    SUBCASE("pure-drift ramp between nodes") {
        DelaySystem ramp(
            1, 1, 1.0,
            [](std::span<const double>, std::span<const double>, std::span<double> out) {
                out[0] = 1.0;
            },
            [](std::span<const double>, std::span<const double>, std::span<double> out) {
                out[0] = 0.0;
            });
        InitialSegment zero = InitialSegment::constant(State{0.0}, 1.0);
        NoiseStream stream(12, 0, 1);
        FinePath fine(stream, 0.125, 1.5);
        BridgedWiener noise(fine, stream);
        AdaptiveTrajectory traj =
            integrate_adaptive(ramp, constant_controller(0.25, 1.0), zero, noise, 1.0);
        const State mid = interpolate(traj, ramp, zero, noise, 0.6);
        CHECK(mid[0] == doctest::Approx(0.6).epsilon(1e-14));
    }
    SUBCASE("sub-step splitting oracle at 1e-12") {
        Problem prob = linear_problem();
        StepController ctrl = prob.make_controller(0.25, 2.0);
        NoiseStream stream(0xBEEF, 0, 1);
        FinePath fine(stream, 0.0078125, 2.5);
        BridgedWiener noise(fine, stream);
        AdaptiveTrajectory base = integrate_adaptive(prob.system, ctrl, prob.xi, noise, 2.0);
        REQUIRE(base.status == TrajectoryStatus::ReachedHorizon);

        const std::size_t k = base.steps.size() / 2;
        const double d = 0.37 * base.steps[k];
        const double t_star = base.times[k] + d;
        const State expected = interpolate(base, prob.system, prob.xi, noise, t_star);

        // re-simulate with the same step sequence, split at t_star; the EM
        // sub-step freezes the same coefficients, so the state at t_star is
        // the interpolant value
        std::vector<double> script(base.steps.begin(),
                                   base.steps.begin() + static_cast<std::ptrdiff_t>(k));
        script.push_back(d);
        AdaptiveTrajectory resim = integrate_adaptive(
            prob.system, scripted_controller(script), prob.xi, noise, t_star);
        REQUIRE(resim.times.back() == t_star);
        CHECK(resim.final_state[0] ==
              doctest::Approx(expected[0]).epsilon(1e-12));
    }
}

TEST_CASE("long-horizon pruning keeps the delay window readable") {
    Problem prob = counterexample_problem();
    IntegrateOptions opts;
    opts.record_path = false;
    opts.prune_history = true;
    opts.observe_times = {1.0, 3.0, 5.0};
    ForwardWiener noise(NoiseStream(4242, 0, 1));
    AdaptiveTrajectory traj = integrate_adaptive(
        prob.system, prob.make_controller(0.1, 5.0), prob.xi, noise, 5.0, opts);
    CHECK(traj.status == TrajectoryStatus::ReachedHorizon);
    CHECK(traj.times.empty()); // not recorded
    CHECK(traj.obs_times == opts.observe_times);
    CHECK(traj.obs_states.size() == 3);
    // xi(0) = 100 dominates the decaying path up to per-step noise
    CHECK(traj.sup_abs_nodes >= 100.0);
    CHECK(traj.sup_abs_nodes < 101.0);
}
