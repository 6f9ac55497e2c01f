#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qstrat/dir_min.hpp"
#include "qstrat/frequency.hpp"

using namespace qstrat;
using std::numbers::pi;

namespace {

QField branch_boundary_data(int q, int p, int nodes) {
    // Analytic values everywhere; only the boundary ring is fixed, the
    // interior is overwritten by the solver's own initialization.
    return make_branch_field(q, p, {1.0, 0.0}, GridSpec::centered(2, 1.0, nodes));
}

}  // namespace

TEST_CASE("single-valued linear data: discrete harmonic equals linear") {
    const GridSpec g = GridSpec::centered(2, 1.0, 33);
    const QField data = make_field(g, 1, 2, [](std::span<const double> x) {
        return QPoint(1, 2, Vec{x[0], 0.3 * x[1]});
    });
    const SolveResult res = minimize(data);
    for (std::size_t node = 0; node < res.field.node_count(); ++node) {
        const Vec p = res.field.node_position(node);
        CHECK(std::abs(res.field.raw(node)[0] - p[0]) <= 1e-8);
        CHECK(std::abs(res.field.raw(node)[1] - 0.3 * p[1]) <= 1e-8);
    }
}

TEST_CASE("constant boundary data collapses to the constant") {
    const GridSpec g = GridSpec::centered(2, 1.0, 17);
    const QField data =
        make_constant_field(QPoint(2, 2, Vec{0.4, -0.1, -0.4, 0.1}), g);
    const SolveResult res = minimize(data);
    CHECK(res.energy == doctest::Approx(0.0).epsilon(1e-14));
    for (std::size_t node = 0; node < res.field.node_count(); ++node)
        CHECK(g_distance(res.field.value(node), data.value(node)) <= 1e-9);
}

TEST_CASE("branch trace data recovers the two-sheet minimizer") {
    const QField data = branch_boundary_data(2, 1, 65);
    const SolveResult res = minimize(data);

    // Ball energy of the analytic minimizer: D(0,1) = 2 pi.
    const double d01 = dirichlet_energy(res.field, {{0.0, 0.0}, 1.0});
    CHECK(d01 == doctest::Approx(2.0 * pi).epsilon(0.08));

    // Frequency at the cone point.
    CHECK(frequency(res.field, {0.0, 0.0}, 0.3) == doctest::Approx(0.5).epsilon(0.1));

    // Comparison principle: the discrete minimum does not exceed the
    // analytic competitor restricted to the grid.
    CHECK(res.energy <= total_energy(data) * (1.0 + 1e-9));

    // Boundary nodes are bit-identical to the datum.
    for (std::size_t node = 0; node < data.node_count(); ++node) {
        if (!data.is_boundary(node)) continue;
        const auto a = data.raw(node);
        const auto b = res.field.raw(node);
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }

    // Logged energies never increase.
    for (std::size_t j = 1; j < res.log.size(); ++j)
        CHECK(res.log[j].energy <=
              res.log[j - 1].energy + 1e-12 * std::abs(res.log[j - 1].energy));
}

TEST_CASE("sheet relabeling at initialization does not change the energy") {
    const QField data = branch_boundary_data(2, 1, 33);
    SolveOptions a, b;
    a.seed = 0;
    b.seed = 12345;
    const double ea = minimize(data, a).energy;
    const double eb = minimize(data, b).energy;
    CHECK(std::abs(ea - eb) <= 1e-6 * std::max(ea, eb));
}

TEST_CASE("iterate_once") {
    // A converged configuration is a fixed point.
    const GridSpec g = GridSpec::centered(2, 1.0, 9);
    const QField c = make_constant_field(QPoint(2, 2, Vec{1, 0, -1, 0}), g);
    const auto [fixed, e_fixed] = iterate_once(c);
    CHECK(e_fixed == doctest::Approx(0.0));
    for (std::size_t node = 0; node < c.node_count(); ++node)
        CHECK(g_distance(fixed.value(node), c.value(node)) <= 1e-15);

    // A single free node moves to the mean of its matched neighbors.
    const GridSpec g3 = GridSpec::centered(2, 1.0, 3);
    QField one = make_field(g3, 1, 1, [](std::span<const double> x) {
        return QPoint(1, 1, Vec{x[0] + 2.0 * x[1]});
    });
    one.set_value(one.node_index(std::vector<int>{1, 1}), QPoint(1, 1, Vec{100.0}));
    const auto [relaxed, e1] = iterate_once(one);
    double mean = 0.0;
    for (const auto& idx :
         {std::vector<int>{0, 1}, {2, 1}, {1, 0}, {1, 2}})
        mean += one.value(one.node_index(idx)).sheet(0)[0];
    mean /= 4.0;
    CHECK(relaxed.value(relaxed.node_index(std::vector<int>{1, 1})).sheet(0)[0] ==
          doctest::Approx(mean).epsilon(1e-14));

    // Energy is nonincreasing along 100 sweeps from a random start.
    Rng rng(42);
    const GridSpec g17 = GridSpec::centered(2, 1.0, 17);
    QField noisy = make_field(g17, 2, 2, [&](std::span<const double>) {
        Vec flat(4);
        for (double& v : flat) v = rng.uniform(-1.0, 1.0);
        return QPoint(2, 2, std::move(flat));
    });
    double prev = total_energy(noisy);
    QField cur = noisy;
    for (int sweep = 0; sweep < 100; ++sweep) {
        auto [next, e] = iterate_once(cur);
        CHECK(e <= prev + 1e-12 * std::abs(prev));
        prev = e;
        cur = next;
    }
}

TEST_CASE("invalid inputs are rejected") {
    const GridSpec g = GridSpec::centered(2, 1.0, 9);
    QField bad = make_constant_field(QPoint(1, 1, Vec{1.0}), g);
    bad.set_value(bad.node_index(std::vector<int>{0, 0}),
                  QPoint(1, 1, Vec{std::nan("")}));
    CHECK_THROWS_AS(minimize(bad), validation_error);

    QField no_boundary = make_constant_field(QPoint(1, 1, Vec{1.0}), g);
    for (std::size_t node = 0; node < no_boundary.node_count(); ++node)
        no_boundary.set_boundary(node, false);
    CHECK_THROWS_AS(minimize(no_boundary), validation_error);

    SolveOptions opts;
    opts.energy_tol = -1.0;
    CHECK_THROWS_AS(minimize(make_constant_field(QPoint(1, 1, Vec{0.0}), g), opts),
                    validation_error);
}
