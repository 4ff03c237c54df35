#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "sdde/errors.hpp"
#include "sdde/kahan.hpp"

namespace sdde {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
};

/// Ordinary least squares y ~ a + b x. DegenerateFit for fewer than two
/// points or when all abscissae coincide.
inline LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    if (n < 2 || ys.size() != n)
        throw DegenerateFit("need at least two points");
    KahanSum sx, sy;
    for (std::size_t i = 0; i < n; ++i) {
        sx.add(xs[i]);
        sy.add(ys[i]);
    }
    const double mx = sx.value() / static_cast<double>(n);
    const double my = sy.value() / static_cast<double>(n);
    KahanSum sxx, sxy, syy;
    for (std::size_t i = 0; i < n; ++i) {
        sxx.add((xs[i] - mx) * (xs[i] - mx));
        sxy.add((xs[i] - mx) * (ys[i] - my));
        syy.add((ys[i] - my) * (ys[i] - my));
    }
    if (sxx.value() == 0.0)
        throw DegenerateFit("all abscissae equal");
    LinearFit fit;
    fit.slope = sxy.value() / sxx.value();
    fit.intercept = my - fit.slope * mx;
    if (syy.value() > 0.0) {
        const double ss_res = syy.value() - fit.slope * sxy.value();
        fit.r2 = 1.0 - ss_res / syy.value();
    }
    return fit;
}

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Sample mean with standard error, fixed-order compensated summation.
inline MeanSE mean_se(std::span<const double> values) {
    MeanSE r;
    r.n = values.size();
    if (r.n == 0) return r;
    KahanSum sum;
    for (double v : values) sum.add(v);
    r.mean = sum.value() / static_cast<double>(r.n);
    if (r.n > 1) {
        KahanSum sq;
        for (double v : values) sq.add((v - r.mean) * (v - r.mean));
        r.se = std::sqrt(sq.value() / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
    }
    return r;
}

struct FractionCI {
    std::size_t n = 0;
    std::size_t count = 0;
    double fraction = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Normal-approximation 95% interval for a proportion.
inline FractionCI fraction_ci95(std::size_t count, std::size_t n) {
    FractionCI r;
    r.n = n;
    r.count = count;
    if (n == 0) return r;
    r.fraction = static_cast<double>(count) / static_cast<double>(n);
    const double se = std::sqrt(r.fraction * (1.0 - r.fraction) / static_cast<double>(n));
    r.lo = r.fraction - 1.959963984540054 * se;
    r.hi = r.fraction + 1.959963984540054 * se;
    return r;
}

} // namespace sdde
