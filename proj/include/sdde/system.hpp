#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sdde/errors.hpp"
#include "sdde/linalg.hpp"

namespace sdde {

/// Coefficient callbacks write into caller-provided buffers so the
/// integration loop never allocates. `drift` fills m values, `diffusion`
/// fills m*d values row-major.
using CoefficientFn =
    std::function<void(std::span<const double> x, std::span<const double> y, std::span<double> out)>;

/// dX_t = f(X_t, X_{t-tau}) dt + g(X_t, X_{t-tau}) dW_t with constant delay tau.
class DelaySystem {
public:
    DelaySystem(int state_dim, int noise_dim, double tau, CoefficientFn drift,
                CoefficientFn diffusion);

    int state_dim() const { return m_; }
    int noise_dim() const { return d_; }
    double tau() const { return tau_; }

    void drift_into(std::span<const double> x, std::span<const double> y,
                    std::span<double> out) const {
        drift_(x, y, out);
    }
    void diffusion_into(std::span<const double> x, std::span<const double> y,
                        std::span<double> out) const {
        diffusion_(x, y, out);
    }

private:
    int m_;
    int d_;
    double tau_;
    CoefficientFn drift_;
    CoefficientFn diffusion_;
};

/// f(x, y); throws CoefficientOverflow when the output is non-finite.
State evaluate_drift(const DelaySystem& sys, std::span<const double> x,
                     std::span<const double> y);

/// g(x, y) as an m x d matrix; throws CoefficientOverflow when non-finite.
Matrix evaluate_diffusion(const DelaySystem& sys, std::span<const double> x,
                          std::span<const double> y);

/// History xi on [-tau, 0] with Hoelder metadata. Immutable after
/// construction; construction samples a 1001-point grid to cache the sup
/// norm and the largest adjacent jump.
class InitialSegment {
public:
    using ValueFn = std::function<void(double theta, std::span<double> out)>;

    InitialSegment(ValueFn value, double tau, int state_dim, double holder_constant,
                   double holder_exponent);

    /// Constant segment xi == c.
    static InitialSegment constant(const State& c, double tau);

    void value_into(double theta, std::span<double> out) const;

    double tau() const { return tau_; }
    int state_dim() const { return m_; }
    double holder_constant() const { return holder_constant_; }
    double holder_exponent() const { return holder_exponent_; }

    /// sup norm of the history over the sampling grid.
    double sup_norm() const { return sup_norm_; }
    double max_grid_jump() const { return max_jump_; }

    /// Numerical continuity check: largest adjacent jump on the sampling
    /// grid must be consistent with the declared Hoelder data.
    void check_continuity() const;

private:
    ValueFn value_;
    double tau_;
    int m_;
    double holder_constant_;
    double holder_exponent_;
    double sup_norm_ = 0.0;
    double max_jump_ = 0.0;
};

/// xi(theta); DomainError outside [-tau, 0].
State segment_value(const InitialSegment& xi, double theta);

/// State-dependent step size h^delta with hard clamp bounds.
struct StepController {
    std::function<double(std::span<const double> x)> step_fn;
    double delta = 0.1;
    double h_min = 1e-12;
    double h_max = 1.0;
    double horizon = 1.0;
    std::size_t max_steps = 20'000'000;
};

/// clamp(step_fn(x), h_min, h_max); throws StepFunctionError when step_fn
/// returns a non-finite value.
double propose_step(const StepController& ctrl, std::span<const double> x);

/// Finite-horizon mode additionally requires h_max <= delta * T.
void validate_finite_horizon(const StepController& ctrl);

/// Stability / infinite-horizon mode requires 0 < h_min < h_max < 1.
void validate_stability(const StepController& ctrl);

/// Growth and dissipativity constants attached to a system.
struct GrowthConstants {
    double alpha = 0.0;       // one-sided linear growth
    double beta = 0.0;
    double alpha1 = 0.0;      // dissipativity
    double alpha2 = 0.0;
    double lipschitz = 0.0;   // one-sided / global Lipschitz L
    double poly_gamma = 0.0;  // polynomial-growth Lipschitz constants
    double poly_exponent = 0.0;
    double poly_lambda = 0.0;
    double decay_rate = 0.0;  // lambda in the a.s. stability statement

    static GrowthConstants finite(double alpha, double beta);
    /// Requires alpha1 > alpha2 >= 0, beta > 0.
    static GrowthConstants infinite_horizon(double alpha1, double alpha2, double beta);
    /// Requires alpha1 > 2*alpha2 >= 0, beta > 0.
    static GrowthConstants stability(double alpha1, double alpha2, double beta);
};

/// Indicator step-size rule:
///   h(x) = (1/25            if |x| < 1,
///           0.25 |x|^2 / max(1, F(x)^2)  otherwise) * delta
/// where F is a y-free majorant of |f(x, .)|. The controller's domain is the
/// current state only, so the drift factor inside the rule is replaced by
/// the majorant. h_max_factor must dominate the rule's sup over |x| (0.04
/// when F(x) >= 2.5|x|, as for the built-in problems).
StepController indicator_controller(double delta,
                                    std::function<double(std::span<const double>)> majorant,
                                    double horizon, double h_max_factor = 0.04,
                                    double h_min = 1e-12);

/// h == delta, clamped.
StepController constant_controller(double delta, double horizon);

} // namespace sdde
