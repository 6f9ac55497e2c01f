#pragma once

// The metric space A_Q(R^m) of unordered Q-tuples of points in R^m:
// Q-point values, the matching distance G, means, recentering and
// multiplicity queries. Storage is an ordered list of sheets; the multiset
// semantics are realized by quotienting through permutations at comparison
// time.

#include <span>
#include <utility>
#include <vector>

#include "qstrat/common.hpp"

namespace qstrat {

class QPoint {
public:
    QPoint() = default;

    // Q copies of the origin of R^m.
    QPoint(int q, int m);

    // Takes ownership of a flat (q*m)-vector, sheet-major.
    QPoint(int q, int m, Vec flat);

    static QPoint zero(int q, int m) { return QPoint(q, m); }

    int q() const { return q_; }
    int m() const { return m_; }

    std::span<const double> sheet(int i) const {
        return {flat_.data() + static_cast<std::size_t>(i) * m_,
                static_cast<std::size_t>(m_)};
    }
    std::span<double> sheet(int i) {
        return {flat_.data() + static_cast<std::size_t>(i) * m_,
                static_cast<std::size_t>(m_)};
    }

    const Vec& flat() const { return flat_; }
    Vec& flat() { return flat_; }

private:
    int q_ = 0;
    int m_ = 0;
    Vec flat_;
};

// Clusters of coincident (up to tol) sheets: representative point and its
// multiplicity.
struct SupportAtom {
    Vec point;
    int multiplicity = 0;
};

// Exhaustive minimization is exact and cheap up to 6! = 720 permutations;
// beyond that an O(Q^3) assignment solve takes over.
inline constexpr int kExhaustiveMatchLimit = 6;

// min over permutations sigma of (sum_i |a_i - b_sigma(i)|^2)^(1/2).
double g_distance(const QPoint& a, const QPoint& b);
double g_distance_sq(const QPoint& a, const QPoint& b);

// The minimizing permutation: sheet i of a pairs with sheet sigma[i] of b.
// Among ties (within 1e-12 of squared cost) the lexicographically smallest
// permutation is returned for Q <= kExhaustiveMatchLimit.
std::vector<int> g_matching(const QPoint& a, const QPoint& b);

// Both matching routes exposed for cross-validation.
double g_distance_exhaustive(const QPoint& a, const QPoint& b);
double g_distance_assignment(const QPoint& a, const QPoint& b);

// Multiset equality up to tol on the matching distance.
bool multiset_equal(const QPoint& a, const QPoint& b, double tol = 0.0);

// Arithmetic mean of the Q sheets.
Vec eta_mean(const QPoint& a);

// Subtracts the mean from every sheet; the result has zero mean.
QPoint recenter(const QPoint& a);

// (sum_i |a_i|^2)^(1/2) == g_distance(a, Q copies of 0).
double norm(const QPoint& a);

// Single-linkage clustering of the sheets at linkage distance <= tol.
// Clusters are sorted lexicographically by representative so the result is
// independent of sheet storage order.
std::vector<SupportAtom> support_multiplicities(const QPoint& a, double tol);

// Minimum-cost assignment on a dense n x n cost matrix (row-major), by
// shortest augmenting paths with dual potentials. Returns the column
// assigned to each row.
std::vector<int> min_cost_assignment(std::span<const double> cost, int n);

}  // namespace qstrat
