#include "sdde/history.hpp"

#include <algorithm>

namespace sdde {

HistoryBuffer::HistoryBuffer(const InitialSegment& xi, bool prune, double prune_window)
    : xi_(&xi), m_(xi.state_dim()), prune_(prune), prune_window_(prune_window) {}

void HistoryBuffer::append(double t, std::span<const double> x) {
    if (!times_.empty() && t <= times_.back())
        throw DomainError("history times must be strictly increasing");
    times_.push_back(t);
    states_.insert(states_.end(), x.begin(), x.end());
    if (prune_)
        prune_before(t - prune_window_);
}

void HistoryBuffer::prune_before(double cutoff) {
    while (start_ + 1 < times_.size() && times_[start_ + 1] <= cutoff)
        ++start_;
    // compact occasionally so memory stays proportional to the live window
    if (start_ > 4096 && start_ * 2 > times_.size()) {
        times_.erase(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(start_));
        states_.erase(states_.begin(),
                      states_.begin() + static_cast<std::ptrdiff_t>(start_ * static_cast<std::size_t>(m_)));
        start_ = 0;
    }
}

void HistoryBuffer::step_value_into(double s, std::span<double> out) const {
    if (s < 0.0) {
        xi_->value_into(s, out); // throws DomainError below -tau
        return;
    }
    auto first = times_.begin() + static_cast<std::ptrdiff_t>(start_);
    auto it = std::upper_bound(first, times_.end(), s);
    if (it == first)
        throw DomainError("history lookup before the retained window");
    const auto idx = static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1;
    const double* src = states_.data() + idx * static_cast<std::size_t>(m_);
    std::copy(src, src + m_, out.begin());
}

std::span<const double> HistoryBuffer::last_state() const {
    return {states_.data() + (times_.size() - 1) * static_cast<std::size_t>(m_),
            static_cast<std::size_t>(m_)};
}

State delayed_value(const HistoryBuffer& hist, double t, double tau) {
    State out(static_cast<std::size_t>(hist.segment().state_dim()));
    hist.delayed_into(t, tau, out);
    return out;
}

} // namespace sdde
