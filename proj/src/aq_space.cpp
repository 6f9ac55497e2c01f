#include "qstrat/aq_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qstrat {

namespace {

constexpr double kTieTol = 1e-12;

void check_compatible(const QPoint& a, const QPoint& b) {
    if (a.q() != b.q())
        throw dimension_mismatch("QPoint: Q mismatch (" + std::to_string(a.q()) +
                                 " vs " + std::to_string(b.q()) + ")");
    if (a.m() != b.m())
        throw dimension_mismatch("QPoint: target dimension mismatch (" +
                                 std::to_string(a.m()) + " vs " +
                                 std::to_string(b.m()) + ")");
}

// Dense Q x Q matrix of squared sheet distances.
std::vector<double> cost_matrix(const QPoint& a, const QPoint& b) {
    const int q = a.q();
    std::vector<double> c(static_cast<std::size_t>(q) * q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j)
            c[static_cast<std::size_t>(i) * q + j] = dist_sq(a.sheet(i), b.sheet(j));
    return c;
}

// Exhaustive search over permutations in lexicographic order; strict
// improvement beyond kTieTol keeps the lexicographically smallest optimum.
std::pair<double, std::vector<int>> match_exhaustive(const std::vector<double>& cost,
                                                     int q) {
    std::vector<int> perm(q);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (int i = 0; i < q; ++i) c += cost[static_cast<std::size_t>(i) * q + perm[i]];
        if (c < best_cost - kTieTol) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {best_cost, best};
}

std::pair<double, std::vector<int>> match_assignment(const std::vector<double>& cost,
                                                     int q) {
    std::vector<int> perm = min_cost_assignment(cost, q);
    double c = 0.0;
    for (int i = 0; i < q; ++i) c += cost[static_cast<std::size_t>(i) * q + perm[i]];
    return {c, perm};
}

std::pair<double, std::vector<int>> match(const QPoint& a, const QPoint& b) {
    check_compatible(a, b);
    const int q = a.q();
    const auto cost = cost_matrix(a, b);
    return q <= kExhaustiveMatchLimit ? match_exhaustive(cost, q)
                                      : match_assignment(cost, q);
}

}  // namespace

QPoint::QPoint(int q, int m) : q_(q), m_(m), flat_(static_cast<std::size_t>(q) * m, 0.0) {
    if (q <= 0 || m <= 0) throw validation_error("QPoint: q and m must be positive");
}

QPoint::QPoint(int q, int m, Vec flat) : q_(q), m_(m), flat_(std::move(flat)) {
    if (q <= 0 || m <= 0) throw validation_error("QPoint: q and m must be positive");
    if (flat_.size() != static_cast<std::size_t>(q) * m)
        throw validation_error("QPoint: flat storage size != q*m");
}

double g_distance_sq(const QPoint& a, const QPoint& b) { return match(a, b).first; }

double g_distance(const QPoint& a, const QPoint& b) {
    return std::sqrt(std::max(0.0, g_distance_sq(a, b)));
}

std::vector<int> g_matching(const QPoint& a, const QPoint& b) {
    return match(a, b).second;
}

double g_distance_exhaustive(const QPoint& a, const QPoint& b) {
    check_compatible(a, b);
    return std::sqrt(std::max(0.0, match_exhaustive(cost_matrix(a, b), a.q()).first));
}

double g_distance_assignment(const QPoint& a, const QPoint& b) {
    check_compatible(a, b);
    return std::sqrt(std::max(0.0, match_assignment(cost_matrix(a, b), a.q()).first));
}

bool multiset_equal(const QPoint& a, const QPoint& b, double tol) {
    return g_distance(a, b) <= tol;
}

Vec eta_mean(const QPoint& a) {
    Vec mean(a.m(), 0.0);
    for (int i = 0; i < a.q(); ++i) {
        const auto s = a.sheet(i);
        for (int k = 0; k < a.m(); ++k) mean[k] += s[k];
    }
    for (double& v : mean) v /= a.q();
    return mean;
}

QPoint recenter(const QPoint& a) {
    const Vec mean = eta_mean(a);
    QPoint r = a;
    for (int i = 0; i < r.q(); ++i) {
        auto s = r.sheet(i);
        for (int k = 0; k < r.m(); ++k) s[k] -= mean[k];
    }
    return r;
}

double norm(const QPoint& a) { return norm2(a.flat()); }

std::vector<SupportAtom> support_multiplicities(const QPoint& a, double tol) {
    if (tol < 0.0) throw validation_error("support_multiplicities: tol must be >= 0");
    const int q = a.q();

    // Single-linkage: union sheets at pairwise distance <= tol.
    std::vector<int> parent(q);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j)
            if (dist(a.sheet(i), a.sheet(j)) <= tol) {
                const int ri = find(i), rj = find(j);
                if (ri != rj) parent[rj] = ri;
            }

    std::vector<SupportAtom> atoms;
    std::vector<int> root_atom(q, -1);
    for (int i = 0; i < q; ++i) {
        const int r = find(i);
        if (root_atom[r] < 0) {
            root_atom[r] = static_cast<int>(atoms.size());
            atoms.push_back({Vec(a.m(), 0.0), 0});
        }
        SupportAtom& atom = atoms[root_atom[r]];
        const auto s = a.sheet(i);
        for (int k = 0; k < a.m(); ++k) atom.point[k] += s[k];
        atom.multiplicity += 1;
    }
    for (auto& atom : atoms)
        for (double& v : atom.point) v /= atom.multiplicity;

    std::sort(atoms.begin(), atoms.end(), [](const SupportAtom& x, const SupportAtom& y) {
        return lex_less(x.point, y.point);
    });
    return atoms;
}

// Shortest-augmenting-path assignment with dual potentials (Jonker-Volgenant
// style). 1-indexed internals; row 0 / col 0 are sentinels.
std::vector<int> min_cost_assignment(std::span<const double> cost, int n) {
    if (n <= 0) throw validation_error("min_cost_assignment: n must be positive");
    if (cost.size() != static_cast<std::size_t>(n) * n)
        throw validation_error("min_cost_assignment: cost matrix size != n*n");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> row_of_col(n + 1, 0);  // matched row per column
    std::vector<int> way(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = row_of_col[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur =
                    cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const int j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= n; ++j)
        if (row_of_col[j] >= 1) col_of_row[row_of_col[j] - 1] = j - 1;
    return col_of_row;
}

}  // namespace qstrat
