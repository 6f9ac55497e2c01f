#pragma once

// Discrete Q-valued fields on rectangular grids: construction (including
// closed-form branch-map fields), Dirichlet and sphere energies, traces,
// local decomposition into lower-Q sheafs, and file I/O.

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qstrat/aq_space.hpp"
#include "qstrat/common.hpp"

namespace qstrat {

struct GridSpec {
    int n = 2;              // domain dimension (2 fully supported, 3 experimental)
    Vec origin;             // size n
    double spacing = 0.0;   // h > 0
    std::vector<int> dims;  // nodes per axis, each >= 2

    void validate() const;
    std::size_t node_count() const;

    // Centered square/cube grid on [-extent, extent]^n with nodes_per_axis
    // nodes per axis.
    static GridSpec centered(int n, double extent, int nodes_per_axis);
};

struct BallSpec {
    Vec center;
    double radius = 0.0;
};

class QField {
public:
    QField() = default;
    QField(GridSpec grid, int q, int m);

    const GridSpec& grid() const { return grid_; }
    int n() const { return grid_.n; }
    int m() const { return m_; }
    int q() const { return q_; }
    double spacing() const { return grid_.spacing; }
    std::size_t node_count() const { return grid_.node_count(); }

    std::size_t node_index(std::span<const int> idx) const;
    std::vector<int> node_coords(std::size_t node) const;
    Vec node_position(std::size_t node) const;
    Vec node_position(std::span<const int> idx) const;

    QPoint value(std::size_t node) const;
    void set_value(std::size_t node, const QPoint& p);

    std::span<const double> raw(std::size_t node) const;
    std::span<double> raw(std::size_t node);
    const Vec& values_flat() const { return values_; }

    bool is_boundary(std::size_t node) const { return boundary_[node] != 0; }
    void set_boundary(std::size_t node, bool b) { boundary_[node] = b ? 1 : 0; }
    const std::vector<std::uint8_t>& boundary_mask() const { return boundary_; }

    // Marks the topological boundary of the grid box (any index at 0 or
    // dims-1) as fixed.
    void mark_box_boundary();

    // Squared pointwise gradient |Du|^2 at a node, assembled per axis from
    // the incident edge differences G(u(a), u(b))^2 / h^2 (averaged over the
    // one or two incident edges along each axis, then summed over axes).
    double gradient_sq(std::size_t node) const;

    // Value at an arbitrary point: per-sheet multilinear interpolation on
    // the enclosing cell after matching every cell corner to the corner
    // nearest the query point. Ties within 1e-12 resolve to the
    // lexicographically smallest matching.
    QPoint value_at(std::span<const double> point) const;

    bool contains(std::span<const double> point, double slack = 1e-9) const;

private:
    GridSpec grid_;
    int m_ = 0, q_ = 0;
    Vec values_;                          // node-major, sheet-major, component
    std::vector<std::uint8_t> boundary_;  // 1 = fixed Dirichlet node
    std::vector<std::size_t> stride_;
};

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

// The Q branches of coeff * z^(p/q) sampled on the grid: the node at complex
// position z carries {coeff * zeta : zeta^q = z^p}. Requires n = m = 2. The
// value at z = 0 is exactly Q copies of the origin.
QField make_branch_field(int q, int p, std::complex<double> coeff, const GridSpec& grid);

// Constant field equal to value at every node.
QField make_constant_field(const QPoint& value, const GridSpec& grid);

// Field sampled from an arbitrary position -> QPoint map.
QField make_field(const GridSpec& grid, int q, int m,
                  const std::function<QPoint(std::span<const double>)>& sampler);

// ---------------------------------------------------------------------------
// Energies and traces
// ---------------------------------------------------------------------------

// D_u = integral of |Du|^2 over the ball (node-indicator quadrature).
double dirichlet_energy(const QField& f, const BallSpec& ball);

// Total grid energy h^(n-2) * sum over edges of G(u(a), u(b))^2.
double total_energy(const QField& f);

// H_u = integral of |u|^2 over the sphere bounding the ball; trapezoidal in
// angle for n = 2, latitude-longitude product quadrature for n = 3.
double boundary_h(const QField& f, const BallSpec& ball, int samples = 128);

struct SphereTrace {
    std::vector<QPoint> values;  // one per sample point
    std::vector<Vec> points;     // sample locations on the sphere
    std::vector<double> weights; // quadrature weights, summing to |sphere|
};

SphereTrace sphere_trace(const QField& f, const BallSpec& ball, int samples);

// Largest G-distance between the interpolated center value and any node
// value inside the ball.
double oscillation(const QField& f, const BallSpec& ball);

// ---------------------------------------------------------------------------
// Local decomposition
// ---------------------------------------------------------------------------

// Splits f over the ball into J >= 2 lower-Q fields when the center value
// separates into clusters whose pairwise gap exceeds the oscillation of f
// on the ball; std::nullopt means "inseparable". Pieces live on the bounding
// sub-grid of the ball and their multiset union reproduces f at every node
// inside the ball.
std::optional<std::vector<QField>> decompose_local(const QField& f,
                                                   const BallSpec& ball,
                                                   double tol);

// Nodes where all Q sheets collapse to one point (after recentering),
// i.e. norm(recenter(u(x))) < tol. Returns node positions.
std::vector<Vec> max_multiplicity_nodes(const QField& f, double tol);

// ---------------------------------------------------------------------------
// File I/O. Binary little-endian: magic "QFLD", version u32 = 1, then
// n, m, q, dims[n] as u32, origin[n] and spacing as f64, node values
// (node-major, sheets in stored order) as f64, then the boundary mask as
// packed bits. A JSON sidecar (<path>.json) mirrors the header fields.
// ---------------------------------------------------------------------------

void save_field(const QField& f, const std::string& path);
QField load_field(const std::string& path);

}  // namespace qstrat
