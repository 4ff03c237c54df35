#pragma once

namespace sdde {

/// Kahan compensated accumulator. Reductions over Monte Carlo paths run in
/// fixed path-index order with this, so reported statistics do not depend on
/// worker count.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }

    double value() const { return sum; }
};

} // namespace sdde
