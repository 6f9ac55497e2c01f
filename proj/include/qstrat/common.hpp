#pragma once

// Shared scaffolding: error types, small dense-vector helpers, geometric
// constants and a couple of numeric utilities used across the library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qstrat {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Errors. validation_error maps to CLI exit code 2, numeric_error to 1.
// ---------------------------------------------------------------------------

class validation_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched Q or target dimension between two Q-points / fields.
class dimension_mismatch : public validation_error {
public:
    using validation_error::validation_error;
};

// A ball or sample point leaves the grid's active region.
class out_of_domain : public validation_error {
public:
    using validation_error::validation_error;
};

// Grid too coarse for the requested radius.
class resolution_error : public validation_error {
public:
    using validation_error::validation_error;
};

// Missing or inconsistent configuration (e.g. calibration in proof mode).
class config_error : public validation_error {
public:
    using validation_error::validation_error;
};

// Malformed or truncated field files.
class io_error : public validation_error {
public:
    using validation_error::validation_error;
};

// Degenerate quantity at runtime: H ~ 0, vanishing blowup energy, ...
class degenerate_error : public numeric_error {
public:
    using numeric_error::numeric_error;
};

// Non-finite values produced while iterating.
class numeric_failure : public numeric_error {
public:
    using numeric_error::numeric_error;
};

// ---------------------------------------------------------------------------
// Small vector helpers (n, m <= 3 in practice; kept allocation-light).
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2_sq(std::span<const double> a) { return dot(a, a); }

inline double norm2(std::span<const double> a) { return std::sqrt(norm2_sq(a)); }

inline double dist_sq(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(dist_sq(a, b));
}

inline Vec vec_add(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec vec_sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec vec_scale(std::span<const double> a, double c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

// Lexicographic comparison with an absolute tolerance used to break
// near-ties deterministically.
inline bool lex_less(std::span<const double> a, std::span<const double> b,
                     double tol = 0.0) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i] - tol) return true;
        if (a[i] > b[i] + tol) return false;
    }
    return false;
}

// Volume of the unit n-ball.
inline double unit_ball_volume(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Least-squares line fit; returns (slope, intercept).
// ---------------------------------------------------------------------------

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit least_squares_line(std::span<const double> xs,
                                  std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw validation_error("least_squares_line: need >= 2 paired samples");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300)
        throw numeric_error("least_squares_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

// Slope of log(y) against log(x); xs, ys must be positive.
inline double loglog_slope(std::span<const double> xs,
                           std::span<const double> ys) {
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0)
            throw validation_error("loglog_slope: nonpositive sample");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    return least_squares_line(lx, ly).slope;
}

// Geometric sequence of k values from a to b inclusive (k >= 2).
inline std::vector<double> geometric_range(double a, double b, int k) {
    if (k < 2 || a <= 0.0 || b <= 0.0)
        throw validation_error("geometric_range: need k >= 2 and positive endpoints");
    std::vector<double> r(k);
    const double step = std::pow(b / a, 1.0 / (k - 1));
    double v = a;
    for (int i = 0; i < k; ++i) {
        r[i] = v;
        v *= step;
    }
    r.back() = b;
    return r;
}

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 core so streams are identical across
// platforms and standard-library versions.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace qstrat
