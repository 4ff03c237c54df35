#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sdde {

/// State vector in R^m. Plain storage; the owning system fixes m.
using State = std::vector<double>;

/// Dense m x d matrix, row-major. Small enough that plain loops beat
/// anything heavier for the dimensions this library sees.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

/// out += G * w where G is m x d row-major.
inline void add_matvec(std::span<const double> g, std::size_t m, std::size_t d,
                       std::span<const double> w, std::span<double> out) {
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += g[i * d + j] * w[j];
        out[i] += s;
    }
}

} // namespace sdde
