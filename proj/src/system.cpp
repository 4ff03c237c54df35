#include "sdde/system.hpp"

#include <algorithm>
#include <cmath>

namespace sdde {

DelaySystem::DelaySystem(int state_dim, int noise_dim, double tau, CoefficientFn drift,
                         CoefficientFn diffusion)
    : m_(state_dim), d_(noise_dim), tau_(tau), drift_(std::move(drift)),
      diffusion_(std::move(diffusion)) {
    if (m_ < 1 || d_ < 1)
        throw DomainError("state and noise dimensions must be positive");
    if (!(tau_ > 0.0))
        throw DomainError("delay tau must be positive");
    if (!drift_ || !diffusion_)
        throw DomainError("drift and diffusion callbacks are required");
}

State evaluate_drift(const DelaySystem& sys, std::span<const double> x,
                     std::span<const double> y) {
    State out(static_cast<std::size_t>(sys.state_dim()));
    sys.drift_into(x, y, out);
    if (!all_finite(out))
        throw CoefficientOverflow("drift produced a non-finite value");
    return out;
}

Matrix evaluate_diffusion(const DelaySystem& sys, std::span<const double> x,
                          std::span<const double> y) {
    Matrix out(static_cast<std::size_t>(sys.state_dim()),
               static_cast<std::size_t>(sys.noise_dim()));
    sys.diffusion_into(x, y, out.data);
    if (!all_finite(out.data))
        throw CoefficientOverflow("diffusion produced a non-finite value");
    return out;
}

namespace {
constexpr int kSegmentGridPoints = 1000; // jumps sampled over 10^3 intervals
}

InitialSegment::InitialSegment(ValueFn value, double tau, int state_dim,
                               double holder_constant, double holder_exponent)
    : value_(std::move(value)), tau_(tau), m_(state_dim),
      holder_constant_(holder_constant), holder_exponent_(holder_exponent) {
    if (!(tau_ > 0.0))
        throw DomainError("segment domain requires tau > 0");
    if (m_ < 1)
        throw DomainError("segment state dimension must be positive");
    if (holder_constant_ < 0.0 || !(holder_exponent_ > 0.0))
        throw DomainError("Hoelder metadata requires Lambda >= 0 and q > 0");

    State prev(static_cast<std::size_t>(m_)), cur(static_cast<std::size_t>(m_)),
        diff(static_cast<std::size_t>(m_));
    for (int i = 0; i <= kSegmentGridPoints; ++i) {
        const double theta = -tau_ + tau_ * static_cast<double>(i) / kSegmentGridPoints;
        value_(std::min(theta, 0.0), cur);
        if (!all_finite(cur))
            throw DomainError("initial segment is not finite on its domain");
        sup_norm_ = std::max(sup_norm_, norm2(cur));
        if (i > 0) {
            for (int k = 0; k < m_; ++k)
                diff[static_cast<std::size_t>(k)] =
                    cur[static_cast<std::size_t>(k)] - prev[static_cast<std::size_t>(k)];
            max_jump_ = std::max(max_jump_, norm2(diff));
        }
        std::swap(prev, cur);
    }
    check_continuity();
}

InitialSegment InitialSegment::constant(const State& c, double tau) {
    State copy = c;
    return InitialSegment(
        [copy](double, std::span<double> out) {
            std::copy(copy.begin(), copy.end(), out.begin());
        },
        tau, static_cast<int>(c.size()), 0.0, 1.0);
}

void InitialSegment::value_into(double theta, std::span<double> out) const {
    if (theta < -tau_ || theta > 0.0)
        throw DomainError("segment argument outside [-tau, 0]");
    value_(theta, out);
}

void InitialSegment::check_continuity() const {
    const double dtheta = tau_ / kSegmentGridPoints;
    const double holder_bound = holder_constant_ * std::pow(dtheta, holder_exponent_);
    const double tol = std::max(8.0 * holder_bound, 1e-7 * (1.0 + sup_norm_));
    if (max_jump_ > tol)
        throw DomainError("initial segment fails the sampled continuity check");
}

State segment_value(const InitialSegment& xi, double theta) {
    State out(static_cast<std::size_t>(xi.state_dim()));
    xi.value_into(theta, out);
    return out;
}

double propose_step(const StepController& ctrl, std::span<const double> x) {
    const double raw = ctrl.step_fn(x);
    if (!std::isfinite(raw))
        throw StepFunctionError("step function returned a non-finite value");
    return std::clamp(raw, ctrl.h_min, ctrl.h_max);
}

void validate_finite_horizon(const StepController& ctrl) {
    if (!(ctrl.delta > 0.0 && ctrl.delta < 1.0))
        throw DomainError("delta must lie in (0, 1)");
    if (!(ctrl.h_min > 0.0 && ctrl.h_min <= ctrl.h_max))
        throw DomainError("require 0 < h_min <= h_max");
    if (!(ctrl.horizon > 0.0))
        throw DomainError("horizon must be positive");
    if (ctrl.h_max > ctrl.delta * ctrl.horizon)
        throw DomainError("finite-horizon mode requires h_max <= delta * T");
}

void validate_stability(const StepController& ctrl) {
    if (!(ctrl.delta > 0.0 && ctrl.delta < 1.0))
        throw DomainError("delta must lie in (0, 1)");
    if (!(ctrl.h_min > 0.0 && ctrl.h_min < ctrl.h_max && ctrl.h_max < 1.0))
        throw DomainError("stability mode requires 0 < h_min < h_max < 1");
}

GrowthConstants GrowthConstants::finite(double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0)
        throw DomainError("growth constants must be nonnegative");
    GrowthConstants c;
    c.alpha = alpha;
    c.beta = beta;
    return c;
}

GrowthConstants GrowthConstants::infinite_horizon(double alpha1, double alpha2, double beta) {
    if (!(alpha1 > alpha2 && alpha2 >= 0.0))
        throw DomainError("infinite-horizon mode requires alpha1 > alpha2 >= 0");
    if (!(beta > 0.0))
        throw DomainError("infinite-horizon mode requires beta > 0");
    GrowthConstants c;
    c.alpha1 = alpha1;
    c.alpha2 = alpha2;
    c.beta = beta;
    return c;
}

GrowthConstants GrowthConstants::stability(double alpha1, double alpha2, double beta) {
    if (!(alpha1 > 2.0 * alpha2 && alpha2 >= 0.0))
        throw DomainError("stability mode requires alpha1 > 2*alpha2 >= 0");
    if (!(beta > 0.0))
        throw DomainError("stability mode requires beta > 0");
    GrowthConstants c;
    c.alpha1 = alpha1;
    c.alpha2 = alpha2;
    c.beta = beta;
    return c;
}

StepController indicator_controller(double delta,
                                    std::function<double(std::span<const double>)> majorant,
                                    double horizon, double h_max_factor, double h_min) {
    StepController ctrl;
    ctrl.delta = delta;
    ctrl.h_min = h_min;
    ctrl.h_max = delta * h_max_factor;
    ctrl.horizon = horizon;
    ctrl.step_fn = [delta, majorant = std::move(majorant)](std::span<const double> x) {
        const double r = norm2(x);
        if (r < 1.0) return delta / 25.0;
        const double f_bar = majorant(x);
        return 0.25 * r * r / std::max(1.0, f_bar * f_bar) * delta;
    };
    return ctrl;
}

StepController constant_controller(double delta, double horizon) {
    StepController ctrl;
    ctrl.delta = delta;
    ctrl.h_max = delta;
    ctrl.horizon = horizon;
    ctrl.step_fn = [delta](std::span<const double>) { return delta; };
    return ctrl;
}

} // namespace sdde
