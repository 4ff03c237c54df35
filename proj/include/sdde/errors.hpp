#pragma once

#include <stdexcept>
#include <string>

namespace sdde {

/// Drift or diffusion produced a non-finite value: the state has left the
/// representable range.
struct CoefficientOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument outside the declared domain (segment time, bridge time, ...).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Step-size function returned a non-finite or non-positive value.
struct StepFunctionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fixed-grid integration requires tau to be an integer multiple of the step.
struct NonCommensurateDelay : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Clamp radius K must exceed the sup norm of the initial segment.
struct InvalidClampBound : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Lyapunov estimation rejects trajectories flagged as exploded.
struct ExplodedTrajectory : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fewer than the required number of grid points in the tail window.
struct InsufficientTail : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Order fit needs at least two distinct step parameters.
struct DegenerateFit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration rejected before any simulation ran.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace sdde
