#include "sdde/condition.hpp"

#include <cmath>
#include <limits>

namespace sdde {

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                           31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double halton(std::size_t index, int base) {
    double f = 1.0, r = 0.0;
    std::size_t i = index;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % static_cast<std::size_t>(base));
        i /= static_cast<std::size_t>(base);
    }
    return r;
}

double frobenius_sq(std::span<const double> g) {
    double s = 0.0;
    for (double v : g) s += v * v;
    return s;
}

} // namespace

const char* condition_mode_name(ConditionMode mode) {
    switch (mode) {
        case ConditionMode::Finite: return "finite";
        case ConditionMode::Infinite: return "infinite";
        case ConditionMode::Stability: return "stability";
    }
    return "?";
}

SampleBox SampleBox::symmetric(int m, double r) {
    SampleBox b;
    b.x_lo.assign(static_cast<std::size_t>(m), -r);
    b.x_hi.assign(static_cast<std::size_t>(m), r);
    b.y_lo = b.x_lo;
    b.y_hi = b.x_hi;
    return b;
}

ConditionReport check_step_condition(const DelaySystem& sys, const StepController& ctrl,
                                     const GrowthConstants& constants, ConditionMode mode,
                                     const SampleBox& box, std::size_t n_samples) {
    const auto m = static_cast<std::size_t>(sys.state_dim());
    const auto d = static_cast<std::size_t>(sys.noise_dim());
    if (box.x_lo.size() != m || box.x_hi.size() != m || box.y_lo.size() != m ||
        box.y_hi.size() != m)
        throw DomainError("sample box dimensions do not match the system");
    if (n_samples < 1)
        throw DomainError("need at least one sample");

    ConditionReport report;
    report.mode = mode;
    report.worst_margin = std::numeric_limits<double>::infinity();

    State x(m), y(m), f(m);
    std::vector<double> g(m * d);

    auto evaluate_point = [&]() {
        sys.drift_into(x, y, f);
        const double hx = propose_step(ctrl, x);
        double lhs = dot(x, f) + 0.5 * hx * squared_norm(f);
        double rhs = 0.0;
        switch (mode) {
            case ConditionMode::Finite:
                rhs = constants.alpha * (squared_norm(x) + squared_norm(y)) + constants.beta;
                break;
            case ConditionMode::Infinite:
                rhs = -constants.alpha1 * squared_norm(x) + constants.alpha2 * squared_norm(y) +
                      constants.beta;
                break;
            case ConditionMode::Stability: {
                sys.diffusion_into(x, y, g);
                lhs += 0.5 * static_cast<double>(d) * frobenius_sq(g);
                double ratio = 0.0;
                if (constants.alpha2 > 0.0) {
                    const double hy = propose_step(ctrl, y);
                    ratio = std::min(hy, hx) / hx;
                }
                rhs = -constants.alpha1 * squared_norm(x) +
                      constants.alpha2 * ratio * squared_norm(y);
                break;
            }
        }
        const double margin = rhs - lhs;
        ++report.samples;
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_x = x;
            report.worst_y = y;
        }
    };

    // centre, corners, then Halton fill
    for (std::size_t k = 0; k < m; ++k) {
        x[k] = 0.5 * (box.x_lo[k] + box.x_hi[k]);
        y[k] = 0.5 * (box.y_lo[k] + box.y_hi[k]);
    }
    evaluate_point();

    const std::size_t dims = 2 * m;
    const std::size_t corner_count = dims < 20 ? (std::size_t{1} << dims) : 0;
    for (std::size_t c = 0; c < corner_count; ++c) {
        for (std::size_t k = 0; k < m; ++k) {
            x[k] = (c >> k & 1u) ? box.x_hi[k] : box.x_lo[k];
            y[k] = (c >> (m + k) & 1u) ? box.y_hi[k] : box.y_lo[k];
        }
        evaluate_point();
    }

    for (std::size_t i = 0; i < n_samples; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            const double ux = halton(i + 1, kPrimes[k % 20]);
            const double uy = halton(i + 1, kPrimes[(m + k) % 20]);
            x[k] = box.x_lo[k] + ux * (box.x_hi[k] - box.x_lo[k]);
            y[k] = box.y_lo[k] + uy * (box.y_hi[k] - box.y_lo[k]);
        }
        evaluate_point();
    }

    report.pass = report.worst_margin >= 0.0;

    if (mode == ConditionMode::Stability) {
        report.hmax_checked = true;
        report.hmax_lhs = 2.0 * constants.alpha2 * std::exp(2.0 * constants.alpha1 * ctrl.h_max);
        report.hmax_rhs = constants.alpha1;
        report.hmax_ok = report.hmax_lhs < report.hmax_rhs;
        report.pass = report.pass && report.hmax_ok;
    }
    return report;
}

} // namespace sdde
