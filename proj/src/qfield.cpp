#include "qstrat/qfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

namespace qstrat {

namespace {

constexpr std::uint32_t kFieldVersion = 1;
constexpr char kFieldMagic[4] = {'Q', 'F', 'L', 'D'};

void check_ball_in_grid(const QField& f, const BallSpec& ball) {
    const auto& g = f.grid();
    if (static_cast<int>(ball.center.size()) != g.n)
        throw dimension_mismatch("ball center dimension != grid dimension");
    if (!(ball.radius > 0.0)) throw validation_error("ball radius must be positive");
    const double slack = 1e-9 * g.spacing;
    for (int k = 0; k < g.n; ++k) {
        const double lo = g.origin[k];
        const double hi = g.origin[k] + g.spacing * (g.dims[k] - 1);
        if (ball.center[k] - ball.radius < lo - slack ||
            ball.center[k] + ball.radius > hi + slack)
            throw out_of_domain("ball exits the grid region");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// GridSpec
// ---------------------------------------------------------------------------

void GridSpec::validate() const {
    if (n < 1 || n > 3) throw validation_error("grid: domain dimension must be 1..3");
    if (static_cast<int>(origin.size()) != n)
        throw validation_error("grid: origin size != n");
    if (!(spacing > 0.0)) throw validation_error("grid: spacing must be positive");
    if (static_cast<int>(dims.size()) != n)
        throw validation_error("grid: dims size != n");
    for (int d : dims)
        if (d < 2) throw validation_error("grid: every axis needs >= 2 nodes");
}

std::size_t GridSpec::node_count() const {
    std::size_t c = 1;
    for (int d : dims) c *= static_cast<std::size_t>(d);
    return c;
}

GridSpec GridSpec::centered(int n, double extent, int nodes_per_axis) {
    GridSpec g;
    g.n = n;
    g.origin.assign(n, -extent);
    g.spacing = 2.0 * extent / (nodes_per_axis - 1);
    g.dims.assign(n, nodes_per_axis);
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// QField basics
// ---------------------------------------------------------------------------

QField::QField(GridSpec grid, int q, int m) : grid_(std::move(grid)), m_(m), q_(q) {
    grid_.validate();
    if (q <= 0 || m <= 0) throw validation_error("field: q and m must be positive");
    values_.assign(node_count() * static_cast<std::size_t>(q) * m, 0.0);
    boundary_.assign(node_count(), 0);
    stride_.assign(grid_.n, 1);
    for (int k = grid_.n - 2; k >= 0; --k)
        stride_[k] = stride_[k + 1] * static_cast<std::size_t>(grid_.dims[k + 1]);
}

std::size_t QField::node_index(std::span<const int> idx) const {
    std::size_t node = 0;
    for (int k = 0; k < grid_.n; ++k) node += stride_[k] * static_cast<std::size_t>(idx[k]);
    return node;
}

std::vector<int> QField::node_coords(std::size_t node) const {
    std::vector<int> idx(grid_.n);
    for (int k = 0; k < grid_.n; ++k) {
        idx[k] = static_cast<int>(node / stride_[k]);
        node %= stride_[k];
    }
    return idx;
}

Vec QField::node_position(std::size_t node) const {
    const auto idx = node_coords(node);
    return node_position(idx);
}

Vec QField::node_position(std::span<const int> idx) const {
    Vec p(grid_.n);
    for (int k = 0; k < grid_.n; ++k) p[k] = grid_.origin[k] + grid_.spacing * idx[k];
    return p;
}

QPoint QField::value(std::size_t node) const {
    const auto r = raw(node);
    return QPoint(q_, m_, Vec(r.begin(), r.end()));
}

void QField::set_value(std::size_t node, const QPoint& p) {
    if (p.q() != q_ || p.m() != m_)
        throw dimension_mismatch("set_value: QPoint shape mismatch");
    auto r = raw(node);
    std::copy(p.flat().begin(), p.flat().end(), r.begin());
}

std::span<const double> QField::raw(std::size_t node) const {
    const std::size_t width = static_cast<std::size_t>(q_) * m_;
    return {values_.data() + node * width, width};
}

std::span<double> QField::raw(std::size_t node) {
    const std::size_t width = static_cast<std::size_t>(q_) * m_;
    return {values_.data() + node * width, width};
}

void QField::mark_box_boundary() {
    for (std::size_t node = 0; node < node_count(); ++node) {
        const auto idx = node_coords(node);
        bool on_boundary = false;
        for (int k = 0; k < grid_.n; ++k)
            if (idx[k] == 0 || idx[k] == grid_.dims[k] - 1) on_boundary = true;
        boundary_[node] = on_boundary ? 1 : 0;
    }
}

double QField::gradient_sq(std::size_t node) const {
    const auto idx = node_coords(node);
    const double h2 = grid_.spacing * grid_.spacing;
    const QPoint here = value(node);
    double total = 0.0;
    for (int k = 0; k < grid_.n; ++k) {
        double axis_sum = 0.0;
        int edges = 0;
        for (int dir = -1; dir <= 1; dir += 2) {
            const int j = idx[k] + dir;
            if (j < 0 || j >= grid_.dims[k]) continue;
            auto nb = idx;
            nb[k] = j;
            axis_sum += g_distance_sq(here, value(node_index(nb)));
            ++edges;
        }
        if (edges > 0) total += axis_sum / (edges * h2);
    }
    return total;
}

bool QField::contains(std::span<const double> point, double slack) const {
    if (static_cast<int>(point.size()) != grid_.n) return false;
    for (int k = 0; k < grid_.n; ++k) {
        const double lo = grid_.origin[k];
        const double hi = grid_.origin[k] + grid_.spacing * (grid_.dims[k] - 1);
        if (point[k] < lo - slack || point[k] > hi + slack) return false;
    }
    return true;
}

QPoint QField::value_at(std::span<const double> point) const {
    if (!contains(point, 1e-9 * grid_.spacing))
        throw out_of_domain("value_at: point outside grid");

    // Enclosing cell and local coordinates in [0,1]^n.
    std::vector<int> cell(grid_.n);
    Vec t(grid_.n);
    for (int k = 0; k < grid_.n; ++k) {
        double s = (point[k] - grid_.origin[k]) / grid_.spacing;
        int c = static_cast<int>(std::floor(s));
        c = std::clamp(c, 0, grid_.dims[k] - 2);
        cell[k] = c;
        t[k] = std::clamp(s - c, 0.0, 1.0);
    }

    const int corners = 1 << grid_.n;

    // Reference corner: the one nearest the query point.
    int ref_corner = 0;
    for (int k = 0; k < grid_.n; ++k)
        if (t[k] > 0.5) ref_corner |= (1 << k);

    std::vector<int> idx(grid_.n);
    auto corner_node = [&](int c) {
        for (int k = 0; k < grid_.n; ++k) idx[k] = cell[k] + ((c >> k) & 1);
        return node_index(idx);
    };

    const QPoint ref = value(corner_node(ref_corner));
    QPoint out(q_, m_);
    for (double& v : out.flat()) v = 0.0;

    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        for (int k = 0; k < grid_.n; ++k) w *= ((c >> k) & 1) ? t[k] : (1.0 - t[k]);
        if (w == 0.0) continue;
        const QPoint val = value(corner_node(c));
        // Sheet j of the output follows sheet j of the reference corner.
        const std::vector<int> sigma = g_matching(ref, val);
        for (int j = 0; j < q_; ++j) {
            auto dst = out.sheet(j);
            const auto src = val.sheet(sigma[j]);
            for (int comp = 0; comp < m_; ++comp) dst[comp] += w * src[comp];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

QField make_branch_field(int q, int p, std::complex<double> coeff, const GridSpec& grid) {
    if (grid.n != 2)
        throw validation_error("branch field: only n = 2 domains are supported");
    if (q < 1 || p < 1) throw validation_error("branch field: need q >= 1 and p >= 1");
    QField f(grid, q, 2);
    for (std::size_t node = 0; node < f.node_count(); ++node) {
        const Vec pos = f.node_position(node);
        const std::complex<double> z(pos[0], pos[1]);
        auto r = f.raw(node);
        if (std::abs(z) == 0.0) {
            std::fill(r.begin(), r.end(), 0.0);  // cone point, exactly Q copies of 0
            continue;
        }
        const double rho = std::pow(std::abs(z), static_cast<double>(p) / q);
        const double theta = std::arg(z);
        for (int j = 0; j < q; ++j) {
            const double phase = (p * theta + 2.0 * std::numbers::pi * j) / q;
            const std::complex<double> w =
                coeff * std::polar(rho, phase);
            r[2 * j] = w.real();
            r[2 * j + 1] = w.imag();
        }
    }
    f.mark_box_boundary();
    return f;
}

QField make_constant_field(const QPoint& value, const GridSpec& grid) {
    QField f(grid, value.q(), value.m());
    for (std::size_t node = 0; node < f.node_count(); ++node) f.set_value(node, value);
    f.mark_box_boundary();
    return f;
}

QField make_field(const GridSpec& grid, int q, int m,
                  const std::function<QPoint(std::span<const double>)>& sampler) {
    QField f(grid, q, m);
    for (std::size_t node = 0; node < f.node_count(); ++node)
        f.set_value(node, sampler(f.node_position(node)));
    f.mark_box_boundary();
    return f;
}

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

double dirichlet_energy(const QField& f, const BallSpec& ball) {
    check_ball_in_grid(f, ball);
    const auto& g = f.grid();
    const double cell = std::pow(g.spacing, g.n);

    // Bounding index box of the ball.
    std::vector<int> lo(g.n), hi(g.n);
    for (int k = 0; k < g.n; ++k) {
        lo[k] = std::max(0, static_cast<int>(std::floor(
                                (ball.center[k] - ball.radius - g.origin[k]) / g.spacing)));
        hi[k] = std::min(g.dims[k] - 1,
                         static_cast<int>(std::ceil(
                             (ball.center[k] + ball.radius - g.origin[k]) / g.spacing)));
    }

    double sum = 0.0;
    std::vector<int> idx = lo;
    const double r2 = ball.radius * ball.radius;
    while (true) {
        double d2 = 0.0;
        for (int k = 0; k < g.n; ++k) {
            const double d = g.origin[k] + g.spacing * idx[k] - ball.center[k];
            d2 += d * d;
        }
        if (d2 < r2) sum += f.gradient_sq(f.node_index(idx)) * cell;
        int k = g.n - 1;
        while (k >= 0) {
            if (++idx[k] <= hi[k]) break;
            idx[k] = lo[k];
            --k;
        }
        if (k < 0) break;
    }
    return sum;
}

double total_energy(const QField& f) {
    const auto& g = f.grid();
    const double scale = std::pow(g.spacing, g.n - 2);
    double sum = 0.0;
    for (std::size_t node = 0; node < f.node_count(); ++node) {
        const auto idx = f.node_coords(node);
        const QPoint here = f.value(node);
        for (int k = 0; k < g.n; ++k) {
            if (idx[k] + 1 >= g.dims[k]) continue;
            auto nb = idx;
            nb[k] += 1;
            sum += g_distance_sq(here, f.value(f.node_index(nb)));
        }
    }
    return scale * sum;
}

SphereTrace sphere_trace(const QField& f, const BallSpec& ball, int samples) {
    check_ball_in_grid(f, ball);
    if (samples < 1) throw validation_error("sphere_trace: samples must be positive");
    const auto& g = f.grid();
    SphereTrace tr;

    if (g.n == 2) {
        tr.values.reserve(samples);
        tr.points.reserve(samples);
        tr.weights.assign(samples, 2.0 * std::numbers::pi * ball.radius / samples);
        for (int i = 0; i < samples; ++i) {
            const double th = 2.0 * std::numbers::pi * i / samples;
            Vec p = {ball.center[0] + ball.radius * std::cos(th),
                     ball.center[1] + ball.radius * std::sin(th)};
            tr.values.push_back(f.value_at(p));
            tr.points.push_back(std::move(p));
        }
        return tr;
    }

    if (g.n == 3) {
        // Latitude-longitude product rule; midpoint latitudes avoid the poles.
        const int nphi = std::max(4, static_cast<int>(std::round(std::sqrt(2.0 * samples))));
        const int nth = std::max(2, (samples + nphi - 1) / nphi);
        const double dth = std::numbers::pi / nth;
        const double dphi = 2.0 * std::numbers::pi / nphi;
        for (int a = 0; a < nth; ++a) {
            const double th = (a + 0.5) * dth;
            for (int b = 0; b < nphi; ++b) {
                const double phi = b * dphi;
                Vec p = {ball.center[0] + ball.radius * std::sin(th) * std::cos(phi),
                         ball.center[1] + ball.radius * std::sin(th) * std::sin(phi),
                         ball.center[2] + ball.radius * std::cos(th)};
                tr.values.push_back(f.value_at(p));
                tr.points.push_back(std::move(p));
                tr.weights.push_back(ball.radius * ball.radius * std::sin(th) * dth * dphi);
            }
        }
        return tr;
    }

    throw validation_error("sphere_trace: unsupported domain dimension");
}

double boundary_h(const QField& f, const BallSpec& ball, int samples) {
    if (samples < 16) throw validation_error("boundary_h: need samples >= 16");
    const SphereTrace tr = sphere_trace(f, ball, samples);
    double sum = 0.0;
    for (std::size_t i = 0; i < tr.values.size(); ++i) {
        const double nv = norm(tr.values[i]);
        sum += tr.weights[i] * nv * nv;
    }
    return sum;
}

double oscillation(const QField& f, const BallSpec& ball) {
    check_ball_in_grid(f, ball);
    const QPoint center_val = f.value_at(ball.center);
    double osc = 0.0;
    const double r2 = ball.radius * ball.radius;
    for (std::size_t node = 0; node < f.node_count(); ++node) {
        const Vec p = f.node_position(node);
        if (dist_sq(p, ball.center) >= r2) continue;
        osc = std::max(osc, g_distance(center_val, f.value(node)));
    }
    return osc;
}

// ---------------------------------------------------------------------------
// Local decomposition
// ---------------------------------------------------------------------------

std::optional<std::vector<QField>> decompose_local(const QField& f,
                                                   const BallSpec& ball,
                                                   double tol) {
    if (!(tol > 0.0)) throw validation_error("decompose_local: tol must be positive");
    check_ball_in_grid(f, ball);
    const auto& g = f.grid();

    const QPoint center_val = f.value_at(ball.center);
    const auto atoms = support_multiplicities(center_val, tol);
    if (atoms.size() < 2) return std::nullopt;

    double separation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < atoms.size(); ++i)
        for (std::size_t j = i + 1; j < atoms.size(); ++j)
            separation = std::min(separation, dist(atoms[i].point, atoms[j].point));

    if (!(separation > oscillation(f, ball))) return std::nullopt;

    // Bounding sub-grid of the ball.
    GridSpec sub;
    sub.n = g.n;
    sub.spacing = g.spacing;
    std::vector<int> lo(g.n), hi(g.n);
    for (int k = 0; k < g.n; ++k) {
        lo[k] = std::max(0, static_cast<int>(std::floor(
                                (ball.center[k] - ball.radius - g.origin[k]) / g.spacing)));
        hi[k] = std::min(g.dims[k] - 1,
                         static_cast<int>(std::ceil(
                             (ball.center[k] + ball.radius - g.origin[k]) / g.spacing)));
        if (hi[k] - lo[k] < 1) {  // keep at least two nodes per axis
            lo[k] = std::max(0, hi[k] - 1);
            hi[k] = std::min(g.dims[k] - 1, lo[k] + 1);
        }
        sub.origin.push_back(g.origin[k] + g.spacing * lo[k]);
        sub.dims.push_back(hi[k] - lo[k] + 1);
    }

    // The reference multiset: multiplicity-weighted cluster representatives.
    Vec ref_flat;
    for (const auto& atom : atoms)
        for (int c = 0; c < atom.multiplicity; ++c)
            ref_flat.insert(ref_flat.end(), atom.point.begin(), atom.point.end());
    const QPoint ref(f.q(), f.m(), std::move(ref_flat));
    std::vector<int> slot_atom(f.q());
    {
        int s = 0;
        for (std::size_t a = 0; a < atoms.size(); ++a)
            for (int c = 0; c < atoms[a].multiplicity; ++c) slot_atom[s++] = static_cast<int>(a);
    }

    std::vector<QField> pieces;
    pieces.reserve(atoms.size());
    for (const auto& atom : atoms) pieces.emplace_back(sub, atom.multiplicity, f.m());

    const double r2 = ball.radius * ball.radius;
    std::vector<int> idx(g.n);
    for (std::size_t sn = 0; sn < pieces[0].node_count(); ++sn) {
        const auto sidx = pieces[0].node_coords(sn);
        for (int k = 0; k < g.n; ++k) idx[k] = lo[k] + sidx[k];
        const std::size_t node = f.node_index(idx);
        const QPoint val = f.value(node);

        // Matching against the representative multiset routes each sheet to
        // its cluster while respecting multiplicities.
        const std::vector<int> sigma = g_matching(ref, val);
        std::vector<int> next_sheet(atoms.size(), 0);
        bool consistent = true;
        const Vec pos = f.node_position(node);
        const bool inside = dist_sq(pos, ball.center) < r2;
        for (int s = 0; s < f.q(); ++s) {
            const int a = slot_atom[s];
            const auto src = val.sheet(sigma[s]);
            if (inside && dist(src, atoms[a].point) >= 0.5 * separation)
                consistent = false;
            auto dst = pieces[a].raw(sn);
            const int sheet = next_sheet[a]++;
            for (int comp = 0; comp < f.m(); ++comp) dst[sheet * f.m() + comp] = src[comp];
        }
        if (inside && !consistent) return std::nullopt;
    }

    for (auto& piece : pieces) piece.mark_box_boundary();
    return pieces;
}

std::vector<Vec> max_multiplicity_nodes(const QField& f, double tol) {
    std::vector<Vec> out;
    for (std::size_t node = 0; node < f.node_count(); ++node) {
        if (norm(recenter(f.value(node))) < tol) out.push_back(f.node_position(node));
    }
    return out;
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw io_error("field file: truncated");
    return v;
}

}  // namespace

void save_field(const QField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for writing: " + path);
    os.write(kFieldMagic, 4);
    write_pod<std::uint32_t>(os, kFieldVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(f.n()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(f.m()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(f.q()));
    for (int k = 0; k < f.n(); ++k)
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(f.grid().dims[k]));
    for (int k = 0; k < f.n(); ++k) write_pod<double>(os, f.grid().origin[k]);
    write_pod<double>(os, f.spacing());

    const Vec& vals = f.values_flat();
    os.write(reinterpret_cast<const char*>(vals.data()),
             static_cast<std::streamsize>(vals.size() * sizeof(double)));

    const auto& mask = f.boundary_mask();
    std::vector<std::uint8_t> packed((mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    os.write(reinterpret_cast<const char*>(packed.data()),
             static_cast<std::streamsize>(packed.size()));
    if (!os) throw io_error("write failed: " + path);
    os.close();

    nlohmann::json sidecar;
    sidecar["magic"] = "QFLD";
    sidecar["version"] = kFieldVersion;
    sidecar["n"] = f.n();
    sidecar["m"] = f.m();
    sidecar["q"] = f.q();
    sidecar["dims"] = f.grid().dims;
    sidecar["origin"] = f.grid().origin;
    sidecar["spacing"] = f.spacing();
    std::ofstream js(path + ".json");
    js << sidecar.dump(2) << "\n";
}

QField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kFieldMagic, 4) != 0)
        throw io_error("field file: bad magic");
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kFieldVersion) throw io_error("field file: unsupported version");

    GridSpec g;
    g.n = static_cast<int>(read_pod<std::uint32_t>(is));
    if (g.n < 1 || g.n > 3) throw io_error("field file: invalid dimension");
    const int m = static_cast<int>(read_pod<std::uint32_t>(is));
    const int q = static_cast<int>(read_pod<std::uint32_t>(is));
    if (m < 1 || q < 1) throw io_error("field file: invalid q or m");
    g.dims.resize(g.n);
    for (int k = 0; k < g.n; ++k) {
        g.dims[k] = static_cast<int>(read_pod<std::uint32_t>(is));
        if (g.dims[k] < 2) throw io_error("field file: axis needs >= 2 nodes");
    }
    g.origin.resize(g.n);
    for (int k = 0; k < g.n; ++k) g.origin[k] = read_pod<double>(is);
    g.spacing = read_pod<double>(is);
    if (!(g.spacing > 0.0)) throw io_error("field file: spacing must be positive");

    QField f(g, q, m);
    Vec vals(f.node_count() * static_cast<std::size_t>(q) * m);
    is.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!is) throw io_error("field file: value payload size mismatch");
    if (!all_finite(vals)) throw io_error("field file: non-finite values");

    std::vector<std::uint8_t> packed((f.node_count() + 7) / 8);
    is.read(reinterpret_cast<char*>(packed.data()),
            static_cast<std::streamsize>(packed.size()));
    if (!is) throw io_error("field file: boundary mask size mismatch");
    is.peek();
    if (!is.eof()) throw io_error("field file: trailing bytes");

    for (std::size_t node = 0; node < f.node_count(); ++node) {
        auto r = f.raw(node);
        const double* src = vals.data() + node * r.size();
        std::copy(src, src + r.size(), r.begin());
        f.set_boundary(node, (packed[node / 8] >> (node % 8)) & 1u);
    }
    return f;
}

}  // namespace qstrat
