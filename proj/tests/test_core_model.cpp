#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sdde/condition.hpp"
#include "sdde/problems.hpp"
#include "sdde/system.hpp"

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

DelaySystem linear_system() {
    return DelaySystem(
        1, 1, 1.0,
        [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            out[0] = -4.0 * x[0] + y[0];
        },
        [](std::span<const double> x, std::span<const double>, std::span<double> out) {
            out[0] = 0.5 * x[0];
        });
}

} // namespace

TEST_CASE("drift and diffusion of the blow-up example") {
    Problem prob = counterexample_problem();
    const State zero{0.0}, anything{7.3};
    CHECK(evaluate_drift(prob.system, zero, anything)[0] == 0.0);

    const State one{1.0};
    CHECK(evaluate_drift(prob.system, one, zero)[0] == doctest::Approx(-3.0));
    const State half{0.5};
    CHECK(evaluate_drift(prob.system, half, half)[0] ==
          doctest::Approx(-1.005144).epsilon(1e-6));

    CHECK(evaluate_diffusion(prob.system, zero, anything)(0, 0) == 0.0);
    CHECK(evaluate_diffusion(prob.system, one, zero)(0, 0) ==
          doctest::Approx(1.414214).epsilon(1e-6));
    // sqrt(2) * 0.5 * cos(0.5), cos(0.5) = 0.8775826
    CHECK(evaluate_diffusion(prob.system, half, half)(0, 0) ==
          doctest::Approx(0.6205446).epsilon(1e-6));
}

TEST_CASE("coefficient evaluation is pure and flags overflow") {
    Problem prob = counterexample_problem();
    const State x{1.7}, y{-0.3};
    const State a = evaluate_drift(prob.system, x, y);
    const State b = evaluate_drift(prob.system, x, y);
    CHECK(a[0] == b[0]); // bitwise
    const Matrix ga = evaluate_diffusion(prob.system, x, y);
    const Matrix gb = evaluate_diffusion(prob.system, x, y);
    CHECK(ga(0, 0) == gb(0, 0));

    const State huge{1e200};
    CHECK_THROWS_AS(evaluate_drift(prob.system, huge, y), CoefficientOverflow);
}

TEST_CASE("system construction rejects degenerate delays and dimensions") {
    auto f = [](std::span<const double>, std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
    };
    CHECK_THROWS_AS(DelaySystem(1, 1, 0.0, f, f), DomainError);
    CHECK_THROWS_AS(DelaySystem(1, 1, -1.0, f, f), DomainError);
    CHECK_THROWS_AS(DelaySystem(0, 1, 1.0, f, f), DomainError);
}

TEST_CASE("segment lookup: constant, anchor, affine, domain") {
    InitialSegment hundred = InitialSegment::constant(State{100.0}, 1.0);
    CHECK(segment_value(hundred, -0.3)[0] == 100.0);
    CHECK(segment_value(hundred, 0.0)[0] == 100.0);
    CHECK(segment_value(hundred, -1.0)[0] == 100.0);
    CHECK(hundred.sup_norm() == 100.0);

    InitialSegment affine(
        [](double theta, std::span<double> out) { out[0] = 1.0 + theta; }, 1.0, 1, 1.0, 1.0);
    CHECK(segment_value(affine, -0.25)[0] == 0.75);
    CHECK(segment_value(affine, 0.0)[0] == 1.0);

    CHECK_THROWS_AS(segment_value(affine, 0.1), DomainError);
    CHECK_THROWS_AS(segment_value(affine, -1.5), DomainError);
}

TEST_CASE("segment continuity sampling rejects jumps inconsistent with the metadata") {
    auto step_fn = [](double theta, std::span<double> out) {
        out[0] = theta < -0.5 ? 0.0 : 1.0;
    };
    CHECK_THROWS_AS(InitialSegment(step_fn, 1.0, 1, 0.0, 1.0), DomainError);
    // declaring a huge Hoelder constant cannot whitewash a unit jump either
    CHECK_THROWS_AS(InitialSegment(step_fn, 1.0, 1, 5.0, 1.0), DomainError);
}

TEST_CASE("step proposal: indicator rule branches and clamping") {
    Problem prob = counterexample_problem();
    StepController ctrl = prob.make_controller(0.1, 20.0);

    const State small{0.5};
    CHECK(propose_step(ctrl, small) == doctest::Approx(0.004).epsilon(1e-12));

    // majorant branch: F(2) = 4 + 8 + 1 = 13
    const State two{2.0};
    CHECK(propose_step(ctrl, two) == doctest::Approx(0.25 * 4.0 / 169.0 * 0.1).epsilon(1e-12));

    StepController tiny;
    tiny.step_fn = [](std::span<const double>) { return 1e-30; };
    tiny.h_min = 1e-12;
    tiny.h_max = 1.0;
    CHECK(propose_step(tiny, small) == 1e-12);

    StepController broken;
    broken.step_fn = [](std::span<const double>) { return std::nan(""); };
    CHECK_THROWS_AS(propose_step(broken, small), StepFunctionError);
}

TEST_CASE("proposed steps respect the clamp bounds on random states") {
    Problem prob = counterexample_problem();
    StepController ctrl = prob.make_controller(0.17, 4.0);
    validate_finite_horizon(ctrl); // h_max = 0.04 * 0.17 <= 0.17 * 4
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(-200.0, 200.0);
    for (int i = 0; i < 1000; ++i) {
        const State x{u(rng)};
        const double h = propose_step(ctrl, x);
        CHECK(h >= ctrl.h_min);
        CHECK(h <= ctrl.h_max);
        CHECK(h <= ctrl.delta * ctrl.horizon);
    }
}

TEST_CASE("growth constant factories enforce the mode gates") {
    CHECK_NOTHROW(GrowthConstants::stability(0.3, 0.0, 1.0));
    CHECK_NOTHROW(GrowthConstants::stability(2.5, 1.0, 1.0));
    CHECK_THROWS_AS(GrowthConstants::stability(2.0, 1.0, 1.0), DomainError); // a1 = 2*a2
    CHECK_THROWS_AS(GrowthConstants::stability(1.0, 0.6, 1.0), DomainError);
    CHECK_THROWS_AS(GrowthConstants::stability(0.3, -0.1, 1.0), DomainError);
    CHECK_THROWS_AS(GrowthConstants::stability(0.3, 0.0, 0.0), DomainError);

    CHECK_NOTHROW(GrowthConstants::infinite_horizon(1.0, 0.6, 1.0));
    CHECK_THROWS_AS(GrowthConstants::infinite_horizon(0.5, 0.5, 1.0), DomainError);
}

TEST_CASE("trivial condition check: zero coefficients give margin beta at the origin") {
    DelaySystem sys = zero_system();
    StepController ctrl = constant_controller(0.1, 1.0);
    GrowthConstants c = GrowthConstants::finite(0.5, 2.0);
    ConditionReport rep = check_step_condition(sys, ctrl, c, ConditionMode::Finite,
                                               SampleBox::symmetric(1, 10.0), 512);
    CHECK(rep.pass);
    CHECK(rep.worst_margin == 2.0);
    CHECK(rep.worst_x[0] == 0.0);
    CHECK(rep.worst_y[0] == 0.0);
}

TEST_CASE("stability check of the blow-up example passes on [-50,50]^2") {
    Problem prob = counterexample_problem();
    StepController ctrl = prob.make_controller(0.1, 20.0);
    ConditionReport rep =
        check_step_condition(prob.system, ctrl, prob.constants, ConditionMode::Stability,
                             SampleBox::symmetric(1, 50.0), 4096);
    CHECK(rep.pass);
    CHECK(rep.worst_margin >= 0.0);
    CHECK(rep.hmax_checked);
    CHECK(rep.hmax_ok); // alpha2 = 0 makes 2 a2 e^(2 a1 hmax) < a1 immediate
}

// The sampled margin for the linear SDDE with a1=3, a2=1, h=0.1 is
//   m(x,y) = 0.075 x^2 - 0.6 x y + 0.95 y^2,
// an indefinite form: on [-10,10]^2 its minimum is -1.973684... at
// (x, y) = (+-10, +-60/19). The grid evaluation therefore reports a
// failure; a1 = 2.5 with h = 0.02 turns the form definite and passes.
TEST_CASE("linear SDDE stability check: indefinite margin fails, definite variant passes") {
    DelaySystem sys = linear_system();

    SUBCASE("a1=3, a2=1, h=0.1 fails on the box") {
        StepController ctrl = constant_controller(0.1, 2.0);
        GrowthConstants c = GrowthConstants::stability(3.0, 1.0, 1.0);
        ConditionReport rep = check_step_condition(sys, ctrl, c, ConditionMode::Stability,
                                                   SampleBox::symmetric(1, 10.0), 4096);
        // direct grid oracle over the closed-form margin
        double oracle_min = 0.0;
        for (int i = -100; i <= 100; ++i)
            for (int j = -100; j <= 100; ++j) {
                const double x = i / 10.0, y = j / 10.0;
                oracle_min = std::min(oracle_min, 0.075 * x * x - 0.6 * x * y + 0.95 * y * y);
            }
        CHECK(oracle_min < -1.9);
        CHECK_FALSE(rep.pass);
        CHECK(rep.worst_margin < -1.5);
        CHECK(rep.worst_margin >= -1.9736843); // sampled min cannot beat the true min
    }

    SUBCASE("a1=2.5, a2=1, h=0.02 passes, including the h_max gate") {
        StepController ctrl = constant_controller(0.02, 2.0);
        GrowthConstants c = GrowthConstants::stability(2.5, 1.0, 1.0);
        ConditionReport rep = check_step_condition(sys, ctrl, c, ConditionMode::Stability,
                                                   SampleBox::symmetric(1, 10.0), 4096);
        CHECK(rep.pass);
        CHECK(rep.worst_margin >= 0.0);
        CHECK(rep.hmax_ok);
        CHECK(rep.hmax_lhs == doctest::Approx(2.0 * std::exp(0.1)));
    }
}

TEST_CASE("finite-mode margin implies the one-sided growth condition pointwise") {
    Problem prob = linear_problem();
    StepController ctrl = prob.make_controller(0.25, 2.0);
    ConditionReport rep =
        check_step_condition(prob.system, ctrl, prob.constants, ConditionMode::Finite,
                             SampleBox::symmetric(1, 10.0), 2048);
    CHECK(rep.pass);
    // the h-term is nonnegative, so the plain one-sided condition follows
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const State x{u(rng)}, y{u(rng)};
        const State f = evaluate_drift(prob.system, x, y);
        const double lhs = x[0] * f[0];
        const double rhs =
            prob.constants.alpha * (x[0] * x[0] + y[0] * y[0]) + prob.constants.beta;
        CHECK(lhs <= rhs);
    }
}

TEST_CASE("hmax gate rejects an oversized stability step bound") {
    DelaySystem sys = linear_system();
    StepController ctrl = constant_controller(0.02, 2.0);
    ctrl.h_max = 0.2; // 2 e^(2*2.5*0.2) = 2e > 2.5
    GrowthConstants c = GrowthConstants::stability(2.5, 1.0, 1.0);
    ConditionReport rep = check_step_condition(sys, ctrl, c, ConditionMode::Stability,
                                               SampleBox::symmetric(1, 10.0), 256);
    CHECK(rep.hmax_checked);
    CHECK_FALSE(rep.hmax_ok);
    CHECK_FALSE(rep.pass);
}
