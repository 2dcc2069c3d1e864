#pragma once

// Independent reference implementations used by the tests. Nothing here
// calls into the library, so agreement is evidence rather than tautology.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace oracle {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    return x;
}

// Amplitude of the f Hz component of x by direct DFT projection.
inline double tone_amplitude(std::span<const double> x, double rate_hz, double f) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ph = 2.0 * std::numbers::pi * f * static_cast<double>(i) / rate_hz;
        re += x[i] * std::cos(ph);
        im += x[i] * std::sin(ph);
    }
    return 2.0 * std::hypot(re, im) / static_cast<double>(x.size());
}

inline double mean_abs(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += std::fabs(v);
    return s / static_cast<double>(x.size());
}

inline double var_abs(std::span<const double> x) {
    const double m = mean_abs(x);
    double s = 0.0;
    for (double v : x) s += (std::fabs(v) - m) * (std::fabs(v) - m);
    return s / static_cast<double>(x.size());
}

// Eigenvalues of a symmetric 3x3 matrix by the trigonometric closed form.
inline std::array<double, 3> sym3_eigenvalues(const std::array<std::array<double, 3>, 3>& a) {
    const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if (p1 == 0.0) {
        std::array<double, 3> e{a[0][0], a[1][1], a[2][2]};
        std::sort(e.rbegin(), e.rend());
        return e;
    }
    const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) + (a[2][2] - q) * (a[2][2] - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    std::array<std::array<double, 3>, 3> b{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
    const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                       b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    return {e1, 3.0 * q - e1 - e3, e3};
}

// Population covariance of three channels.
inline std::array<std::array<double, 3>, 3> covariance3(std::span<const double> e, std::span<const double> n,
                                                         std::span<const double> z) {
    const std::array<std::span<const double>, 3> ch{e, n, z};
    std::array<double, 3> m{};
    for (int c = 0; c < 3; ++c) {
        for (double v : ch[c]) m[c] += v;
        m[c] /= static_cast<double>(e.size());
    }
    std::array<std::array<double, 3>, 3> cov{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < e.size(); ++k) s += (ch[i][k] - m[i]) * (ch[j][k] - m[j]);
            cov[i][j] = s / static_cast<double>(e.size());
        }
    return cov;
}

inline double rectilinearity(std::span<const double> e, std::span<const double> n, std::span<const double> z) {
    const auto [a, b, c] = sym3_eigenvalues(covariance3(e, n, z));
    const double s = a + b + c;
    return ((a - b) * (a - b) + (a - c) * (a - c) + (b - c) * (b - c)) / (2.0 * s * s);
}

// |a - b| scaled by max(1, |b|).
inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

}  // namespace oracle
