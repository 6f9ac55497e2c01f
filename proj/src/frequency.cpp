#include "qstrat/frequency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qstrat/parallel.hpp"

namespace qstrat {

namespace {
constexpr double kDegenerateH = 1e-14;
}

double frequency(const QField& f, const Vec& x, double s, int samples) {
    const double h = boundary_h(f, {x, s}, samples);
    if (h < kDegenerateH)
        throw degenerate_error("frequency: H(x,s) ~ 0, field vanishes near x");
    return s * dirichlet_energy(f, {x, s}) / h;
}

RadialProfile radial_profile(const QField& f, const Vec& x,
                             const std::vector<double>& radii, int samples) {
    for (std::size_t j = 0; j + 1 < radii.size(); ++j)
        if (!(radii[j] < radii[j + 1]))
            throw validation_error("radial_profile: radii must be strictly increasing");

    RadialProfile p;
    p.center = x;
    p.radii = radii;
    p.d_vals.assign(radii.size(), 0.0);
    p.h_vals.assign(radii.size(), 0.0);
    p.i_vals.assign(radii.size(), 0.0);
    parallel_for(radii.size(), [&](std::size_t j) {
        p.d_vals[j] = dirichlet_energy(f, {x, radii[j]});
        p.h_vals[j] = boundary_h(f, {x, radii[j]}, samples);
        if (p.h_vals[j] < kDegenerateH)
            throw degenerate_error("radial_profile: H ~ 0 at radius " +
                                   std::to_string(radii[j]));
        p.i_vals[j] = radii[j] * p.d_vals[j] / p.h_vals[j];
    });
    return p;
}

std::vector<std::size_t> monotonicity_violations(const RadialProfile& profile,
                                                 double tol) {
    std::vector<std::size_t> bad;
    for (std::size_t j = 0; j + 1 < profile.i_vals.size(); ++j)
        if (profile.i_vals[j + 1] < profile.i_vals[j] - tol) bad.push_back(j);
    return bad;
}

double pinch(const QField& f, const Vec& x, double s, double lambda, int samples) {
    if (!(lambda > 0.0) || lambda > 1.0)
        throw validation_error("pinch: lambda must lie in (0, 1]");
    if (lambda == 1.0) return 0.0;
    return frequency(f, x, s, samples) - frequency(f, x, lambda * s, samples);
}

QField blowup(const QField& f, const Vec& y, double s, const GridSpec& out_grid,
              double center_tol) {
    out_grid.validate();
    if (out_grid.n != f.n())
        throw dimension_mismatch("blowup: out grid dimension != field dimension");

    const QPoint at_y = f.value_at(y);
    if (norm(recenter(at_y)) > center_tol)
        throw validation_error("blowup: field is not Q copies of a point at y");

    const double d = dirichlet_energy(f, {y, s});
    if (!(d > 0.0)) throw degenerate_error("blowup: zero energy at the given scale");

    // The unit ball of the output must be measurable for the normalization.
    for (int k = 0; k < out_grid.n; ++k) {
        const double lo = out_grid.origin[k];
        const double hi = out_grid.origin[k] + out_grid.spacing * (out_grid.dims[k] - 1);
        if (lo > -1.0 || hi < 1.0)
            throw validation_error("blowup: out grid must contain the unit ball");
    }

    QField g(out_grid, f.q(), f.m());
    Vec src(f.n());
    for (std::size_t node = 0; node < g.node_count(); ++node) {
        const Vec x = g.node_position(node);
        for (int k = 0; k < f.n(); ++k) src[k] = y[k] + s * x[k];
        if (!f.contains(src))
            throw out_of_domain("blowup: rescaled sample leaves the field domain");
        g.set_value(node, f.value_at(src));
    }
    g.mark_box_boundary();

    const double e = dirichlet_energy(g, {Vec(out_grid.n, 0.0), 1.0});
    if (!(e > 0.0)) throw degenerate_error("blowup: resampled energy vanished");
    const double scale = 1.0 / std::sqrt(e);
    for (std::size_t node = 0; node < g.node_count(); ++node) {
        auto r = g.raw(node);
        for (double& v : r) v *= scale;
    }
    return g;
}

BallSpec inscribed_ball(const QField& f) {
    const auto& g = f.grid();
    BallSpec ball;
    ball.center.resize(g.n);
    double radius = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.n; ++k) {
        const double extent = g.spacing * (g.dims[k] - 1);
        ball.center[k] = g.origin[k] + 0.5 * extent;
        radius = std::min(radius, 0.5 * extent);
    }
    ball.radius = radius;
    return ball;
}

double lambda0(const QField& f, double r0, const BallSpec& domain, int samples) {
    if (!(r0 > 0.0)) throw validation_error("lambda0: r0 must be positive");
    if (domain.radius <= 2.0 * r0)
        throw out_of_domain("lambda0: eroded domain is empty (radius <= 2 r0)");

    const double total = dirichlet_energy(f, domain);

    // Nodes of Omega^{r0} = {dist(x, boundary) >= 2 r0}.
    std::vector<std::size_t> nodes;
    const double rmax = domain.radius - 2.0 * r0;
    for (std::size_t node = 0; node < f.node_count(); ++node) {
        if (dist(f.node_position(node), domain.center) <= rmax) nodes.push_back(node);
    }
    if (nodes.empty()) throw out_of_domain("lambda0: no grid nodes in Omega^{r0}");

    std::vector<double> hvals(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) {
        hvals[i] = boundary_h(f, {f.node_position(nodes[i]), r0}, samples);
    });
    const double hmin = *std::min_element(hvals.begin(), hvals.end());
    if (hmin < kDegenerateH)
        throw degenerate_error("lambda0: min H vanishes, field is trivial");
    return r0 * total / hmin;
}

double lambda0(const QField& f, double r0, int samples) {
    return lambda0(f, r0, inscribed_ball(f), samples);
}

}  // namespace qstrat
