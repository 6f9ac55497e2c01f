#pragma once

// Frequency-function analytics: D, H and I radial profiles, monotonicity
// audits, pinching, energy-normalized blowups and the scale bound Lambda0.

#include <vector>

#include "qstrat/qfield.hpp"

namespace qstrat {

struct RadialProfile {
    Vec center;
    std::vector<double> radii;   // strictly increasing
    std::vector<double> d_vals;  // D(center, r)
    std::vector<double> h_vals;  // H(center, r)
    std::vector<double> i_vals;  // r * D / H
};

// Monotonicity tolerance for discrete frequency profiles; discretization
// noise scales like h / r.
inline double tol_mono(double spacing, double min_radius) {
    return 0.02 + 5.0 * spacing / min_radius;
}

// I(x,s) = s * D(x,s) / H(x,s). Throws degenerate_error when H falls below
// 1e-14 (the field vanishes identically near x).
double frequency(const QField& f, const Vec& x, double s, int samples = 128);

RadialProfile radial_profile(const QField& f, const Vec& x,
                             const std::vector<double>& radii, int samples = 128);

// Indices j with i_vals[j+1] < i_vals[j] - tol.
std::vector<std::size_t> monotonicity_violations(const RadialProfile& profile,
                                                 double tol);

// Frequency drop I(x,s) - I(x, lambda*s); requires 0 < lambda <= 1.
double pinch(const QField& f, const Vec& x, double s, double lambda,
             int samples = 128);

// Rescaled restriction of f around y at scale s, resampled on out_grid and
// normalized so that its Dirichlet energy on the unit ball is 1. Requires
// f(y) = Q copies of 0 within center_tol and positive energy at scale s.
QField blowup(const QField& f, const Vec& y, double s, const GridSpec& out_grid,
              double center_tol = 1e-6);

// r0 * (energy over the domain ball) / min over nodes x of the eroded
// domain {dist(x, boundary) >= 2 r0} of H(x, r0).
double lambda0(const QField& f, double r0, const BallSpec& domain,
               int samples = 128);

// Same with the ball inscribed in the grid box as the domain.
double lambda0(const QField& f, double r0, int samples = 128);

// The ball inscribed in the grid box.
BallSpec inscribed_ball(const QField& f);

}  // namespace qstrat
