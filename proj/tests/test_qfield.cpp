#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "qstrat/qfield.hpp"

using namespace qstrat;
using std::numbers::pi;

namespace {

QPoint qp(int q, int m, std::initializer_list<double> flat) {
    return QPoint(q, m, Vec(flat));
}

// u(x) = x1 as a scalar single-valued field.
QField linear_x1_field(const GridSpec& g) {
    return make_field(g, 1, 1, [](std::span<const double> x) {
        return QPoint(1, 1, Vec{x[0]});
    });
}

}  // namespace

TEST_CASE("branch field node values") {
    const GridSpec g = GridSpec::centered(2, 1.0, 65);

    // q = 1, p = 1 is the identity map.
    const QField id = make_branch_field(1, 1, {1.0, 0.0}, g);
    for (std::size_t node = 0; node < id.node_count(); node += 7) {
        const Vec p = id.node_position(node);
        const QPoint v = id.value(node);
        CHECK(v.sheet(0)[0] == doctest::Approx(p[0]).epsilon(1e-12));
        CHECK(v.sheet(0)[1] == doctest::Approx(p[1]).epsilon(1e-12));
    }

    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    // Node z = 1: the two square roots of 1.
    const std::vector<int> at_one = {64, 32};
    const QPoint v1 = b.value(b.node_index(at_one));
    CHECK(multiset_equal(v1, qp(2, 2, {1, 0, -1, 0}), 1e-12));
    // Node z = -1: the two square roots of -1.
    const std::vector<int> at_minus_one = {0, 32};
    const QPoint v2 = b.value(b.node_index(at_minus_one));
    CHECK(multiset_equal(v2, qp(2, 2, {0, 1, 0, -1}), 1e-12));
    // Cone point carries exactly Q copies of 0.
    const std::vector<int> at_zero = {32, 32};
    CHECK(norm(b.value(b.node_index(at_zero))) == 0.0);

    // Mean-free whenever q does not divide p.
    for (std::size_t node = 0; node < b.node_count(); node += 11)
        CHECK(norm2(eta_mean(b.value(node))) <= 1e-12);
    const QField tri = make_branch_field(3, 1, {1.0, 0.0}, g);
    for (std::size_t node = 0; node < tri.node_count(); node += 11)
        CHECK(norm2(eta_mean(tri.value(node))) <= 1e-12);

    CHECK_THROWS_AS(make_branch_field(2, 1, {1.0, 0.0}, GridSpec::centered(3, 1.0, 5)),
                    validation_error);
}

TEST_CASE("dirichlet energy on closed forms") {
    const GridSpec g = GridSpec::centered(2, 1.0, 129);

    // Constant fields carry no energy.
    const QField c = make_constant_field(qp(2, 2, {1, 0, -1, 0}), g);
    CHECK(dirichlet_energy(c, {{0.0, 0.0}, 0.8}) == 0.0);

    // Branch pair: |Du|^2 = 1/|z|, so D(0,s) = 2 pi s.
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    for (double s : {0.25, 0.5, 0.9}) {
        const double d = dirichlet_energy(b, {{0.0, 0.0}, s});
        CHECK(d == doctest::Approx(2.0 * pi * s).epsilon(0.05));
    }

    // u = x1: |Du|^2 = 1, D(0,1) = area of the unit disk.
    const QField lin = linear_x1_field(g);
    CHECK(dirichlet_energy(lin, {{0.0, 0.0}, 1.0}) == doctest::Approx(pi).epsilon(0.03));

    CHECK_THROWS_AS(dirichlet_energy(b, {{0.9, 0.0}, 0.5}), out_of_domain);
}

TEST_CASE("dirichlet energy is additive over disjoint regions") {
    const GridSpec g = GridSpec::centered(2, 1.0, 97);
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    const BallSpec b1{{-0.45, 0.0}, 0.3};
    const BallSpec b2{{0.45, 0.0}, 0.3};

    double expected = 0.0;
    const double cell = g.spacing * g.spacing;
    for (std::size_t node = 0; node < b.node_count(); ++node) {
        const Vec p = b.node_position(node);
        const bool in1 = dist(p, b1.center) < b1.radius;
        const bool in2 = dist(p, b2.center) < b2.radius;
        if (in1 || in2) expected += b.gradient_sq(node) * cell;
    }
    CHECK(dirichlet_energy(b, b1) + dirichlet_energy(b, b2) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("dirichlet energy invariant under target rotations") {
    const GridSpec g = GridSpec::centered(2, 1.0, 65);
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    const double th = 0.83;
    const QField rotated = make_field(g, 2, 2, [&](std::span<const double> x) {
        const std::complex<double> z(x[0], x[1]);
        QPoint v(2, 2);
        if (std::abs(z) > 0) {
            const double r = std::sqrt(std::abs(z));
            const double a = std::arg(z) / 2.0;
            for (int j = 0; j < 2; ++j) {
                const auto w = std::polar(r, a + pi * j + th);
                v.sheet(j)[0] = w.real();
                v.sheet(j)[1] = w.imag();
            }
        }
        return v;
    });
    const BallSpec ball{{0.0, 0.0}, 0.7};
    CHECK(dirichlet_energy(rotated, ball) ==
          doctest::Approx(dirichlet_energy(b, ball)).epsilon(1e-10));
}

TEST_CASE("boundary integral H on closed forms") {
    const GridSpec g = GridSpec::centered(2, 1.0, 129);

    const QField z = make_constant_field(QPoint::zero(2, 2), g);
    CHECK(boundary_h(z, {{0.0, 0.0}, 0.5}) == 0.0);

    // Branch pair: |u|^2 = 2s on the circle of radius s, H = 4 pi s^2.
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    for (double s : {0.25, 0.5, 0.9})
        CHECK(boundary_h(b, {{0.0, 0.0}, s}, 256) ==
              doctest::Approx(4.0 * pi * s * s).epsilon(0.03));

    // u = x1: H(0,s) = pi s^3.
    const QField lin = linear_x1_field(g);
    for (double s : {0.3, 0.6})
        CHECK(boundary_h(lin, {{0.0, 0.0}, s}, 256) ==
              doctest::Approx(pi * s * s * s).epsilon(0.02));

    CHECK_THROWS_AS(boundary_h(b, {{0.0, 0.0}, 0.5}, 8), validation_error);
}

TEST_CASE("homogeneity of the branch pair: D/s and H/s^2 constant") {
    const GridSpec g = GridSpec::centered(2, 1.0, 129);
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    const double h = g.spacing;
    std::vector<double> dratio, hratio;
    for (double s = 4 * h; s <= 0.5; s *= 1.5) {
        dratio.push_back(dirichlet_energy(b, {{0.0, 0.0}, s}) / s);
        hratio.push_back(boundary_h(b, {{0.0, 0.0}, s}, 256) / (s * s));
    }
    for (double v : dratio) CHECK(v == doctest::Approx(dratio.front()).epsilon(0.05));
    for (double v : hratio) CHECK(v == doctest::Approx(hratio.front()).epsilon(0.05));
}

TEST_CASE("sqrt-H spatial continuity bound") {
    const GridSpec g = GridSpec::centered(2, 1.0, 129);
    const double h = g.spacing;
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    const QField lin = linear_x1_field(g);

    for (const QField* f : {&b, &lin}) {
        const Vec y = {0.05, -0.03};
        const double s = 0.4;
        for (const Vec& x : {Vec{0.05 + 2 * h, -0.03}, Vec{0.05, -0.03 + 5 * h}}) {
            const double d = dist(x, y);
            const double lhs = std::abs(std::sqrt(boundary_h(*f, {x, s}, 256)) -
                                        std::sqrt(boundary_h(*f, {y, s}, 256)));
            const double annulus = dirichlet_energy(*f, {y, s + d}) -
                                   dirichlet_energy(*f, {y, s - d});
            const double density =
                dirichlet_energy(*f, {y, s + d}) / (pi * (s + d) * (s + d));
            const double slack = 10.0 * h * density;
            CHECK(lhs <= d * std::sqrt(std::max(0.0, annulus)) + slack);
        }
    }
}

TEST_CASE("sphere trace") {
    const GridSpec g = GridSpec::centered(2, 1.0, 129);

    const QPoint cval = qp(2, 2, {0.3, 0.1, -0.2, 0.4});
    const QField c = make_constant_field(cval, g);
    const SphereTrace tr = sphere_trace(c, {{0.0, 0.0}, 0.5}, 32);
    REQUIRE(tr.values.size() == 32);
    double wsum = 0.0;
    for (double w : tr.weights) wsum += w;
    CHECK(wsum == doctest::Approx(2.0 * pi * 0.5).epsilon(1e-12));
    for (const auto& v : tr.values) CHECK(g_distance(v, cval) <= 1e-12);

    // Branch traces at the four axis angles.
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    const SphereTrace tb = sphere_trace(b, {{0.0, 0.0}, 1.0}, 4);
    const double r2 = std::sqrt(0.5);
    CHECK(multiset_equal(tb.values[0], qp(2, 2, {1, 0, -1, 0}), 1e-9));
    CHECK(multiset_equal(tb.values[1], qp(2, 2, {r2, r2, -r2, -r2}), 1e-9));
    CHECK(multiset_equal(tb.values[2], qp(2, 2, {0, 1, 0, -1}), 1e-9));
    CHECK(multiset_equal(tb.values[3], qp(2, 2, {r2, -r2, -r2, r2}), 1e-9));

    CHECK_THROWS_AS(sphere_trace(b, {{0.0, 0.0}, 0.5}, 0), validation_error);
}

TEST_CASE("local decomposition") {
    const GridSpec g = GridSpec::centered(2, 1.0, 129);

    // Constant two-point field splits into two constant sheets anywhere.
    const QField c = make_constant_field(qp(2, 2, {1, 0, -1, 0}), g);
    const auto pieces = decompose_local(c, {{0.2, 0.1}, 0.15}, 1e-9);
    REQUIRE(pieces.has_value());
    REQUIRE(pieces->size() == 2);
    CHECK((*pieces)[0].q() == 1);
    CHECK((*pieces)[1].q() == 1);

    // Branch pair collides at the origin: inseparable there.
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    CHECK(!decompose_local(b, {{0.0, 0.0}, 0.2}, 1e-9).has_value());

    // Away from the cone point the two sheets separate.
    const BallSpec away{{0.75, 0.0}, 0.1};
    const auto sheets = decompose_local(b, away, 1e-6);
    REQUIRE(sheets.has_value());
    REQUIRE(sheets->size() == 2);

    // Recomposition is exact at every node inside the ball.
    const QField& p0 = (*sheets)[0];
    for (std::size_t sn = 0; sn < p0.node_count(); ++sn) {
        const Vec pos = p0.node_position(sn);
        if (dist(pos, away.center) >= away.radius) continue;
        Vec merged;
        for (const QField& piece : *sheets) {
            const auto r = piece.raw(sn);
            merged.insert(merged.end(), r.begin(), r.end());
        }
        const QPoint re(2, 2, std::move(merged));
        std::vector<int> idx(2);
        for (int k = 0; k < 2; ++k)
            idx[k] = static_cast<int>(std::lround((pos[k] - g.origin[k]) / g.spacing));
        CHECK(g_distance(re, b.value(b.node_index(idx))) == 0.0);
    }
}

TEST_CASE("field file round trip and error paths") {
    const GridSpec g = GridSpec::centered(2, 1.0, 17);
    const QField b = make_branch_field(2, 1, {0.7, 0.2}, g);
    const std::string path = "test_field.qfld";
    save_field(b, path);

    const QField loaded = load_field(path);
    CHECK(loaded.q() == b.q());
    CHECK(loaded.m() == b.m());
    CHECK(loaded.grid().dims == b.grid().dims);
    CHECK(loaded.spacing() == b.spacing());
    CHECK(loaded.values_flat() == b.values_flat());
    CHECK(loaded.boundary_mask() == b.boundary_mask());

    // Sidecar exists and is JSON.
    std::ifstream sidecar(path + ".json");
    CHECK(sidecar.good());

    // Truncation is detected.
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::ofstream out("test_field_trunc.qfld", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_field("test_field_trunc.qfld"), io_error);

    // Nonpositive spacing in the header is rejected.
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        const std::size_t spacing_off = 4 + 4 + 3 * 4 + 2 * 4 + 2 * 8;
        const double bad = -1.0;
        std::memcpy(bytes.data() + spacing_off, &bad, sizeof(double));
        std::ofstream out("test_field_badspacing.qfld", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_field("test_field_badspacing.qfld"), io_error);

    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
    std::remove("test_field_trunc.qfld");
    std::remove("test_field_badspacing.qfld");
}

TEST_CASE("max multiplicity nodes of the branch pair") {
    const GridSpec g = GridSpec::centered(2, 1.0, 65);
    const QField b = make_branch_field(2, 1, {1.0, 0.0}, g);
    const auto nodes = max_multiplicity_nodes(b, 0.05);
    REQUIRE(nodes.size() == 1);
    CHECK(norm2(nodes[0]) <= 1e-12);
}
