#pragma once

#include <span>
#include <vector>

#include "sdde/system.hpp"

namespace sdde {

/// Node storage for one trajectory plus lookup of the piecewise-constant
/// step process: the value at time s is the node state at the largest grid
/// time <= s, and xi(s) for s < 0. Long-horizon runs may prune entries that
/// have left the delay window.
class HistoryBuffer {
public:
    HistoryBuffer(const InitialSegment& xi, bool prune, double prune_window);

    void append(double t, std::span<const double> x);

    /// Step-process value at time s (s >= -tau).
    void step_value_into(double s, std::span<double> out) const;

    /// Value of the delayed argument at node time t: step process at t - tau.
    void delayed_into(double t, double tau, std::span<double> out) const {
        step_value_into(t - tau, out);
    }

    std::size_t node_count() const { return times_.size() - start_; }
    double last_time() const { return times_.back(); }
    std::span<const double> last_state() const;

    const InitialSegment& segment() const { return *xi_; }

    /// Full node arrays; only meaningful when pruning is off.
    std::vector<double>&& take_times() { return std::move(times_); }
    std::vector<double>&& take_states() { return std::move(states_); }

private:
    void prune_before(double cutoff);

    const InitialSegment* xi_;
    int m_;
    bool prune_;
    double prune_window_;
    std::size_t start_ = 0;
    std::vector<double> times_;
    std::vector<double> states_;
};

/// X-bar at the largest grid time <= t - tau (binary search, left-closed
/// intervals); delegates to xi below zero. DomainError when t - tau < -tau.
State delayed_value(const HistoryBuffer& hist, double t, double tau);

} // namespace sdde
