#include "qstrat/dir_min.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "qstrat/common.hpp"

namespace qstrat {

namespace {

// Exhaustive small-Q matching on raw sheet storage, allocation-free.
// Writes the permutation sigma (sheet i of a pairs with sheet sigma[i]
// of b) and returns the matched squared cost.
double match_raw(std::span<const double> a, std::span<const double> b, int q, int m,
                 int* sigma) {
    std::array<double, 64> cost;
    if (q <= 8) {
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) {
                double s = 0.0;
                for (int k = 0; k < m; ++k) {
                    const double d = a[i * m + k] - b[j * m + k];
                    s += d * d;
                }
                cost[i * 8 + j] = s;
            }
    }
    if (q == 1) {
        sigma[0] = 0;
        return cost[0];
    }
    if (q == 2) {
        const double straight = cost[0] + cost[9];
        const double crossed = cost[1] + cost[8];
        if (straight <= crossed) {
            sigma[0] = 0;
            sigma[1] = 1;
            return straight;
        }
        sigma[0] = 1;
        sigma[1] = 0;
        return crossed;
    }
    if (q <= kExhaustiveMatchLimit) {
        std::array<int, 8> perm;
        std::iota(perm.begin(), perm.begin() + q, 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (int i = 0; i < q; ++i) c += cost[i * 8 + perm[i]];
            if (c < best - 1e-12) {
                best = c;
                std::copy(perm.begin(), perm.begin() + q, sigma);
            }
        } while (std::next_permutation(perm.begin(), perm.begin() + q));
        return best;
    }

    std::vector<double> full(static_cast<std::size_t>(q) * q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            double s = 0.0;
            for (int k = 0; k < m; ++k) {
                const double d = a[i * m + k] - b[j * m + k];
                s += d * d;
            }
            full[static_cast<std::size_t>(i) * q + j] = s;
        }
    const auto assignment = min_cost_assignment(full, q);
    double c = 0.0;
    for (int i = 0; i < q; ++i) {
        sigma[i] = assignment[i];
        c += full[static_cast<std::size_t>(i) * q + assignment[i]];
    }
    return c;
}

// Solver state: a working copy of the field plus per-axis edge matchings.
// The matching for the edge leaving node `a` in direction +k maps sheets
// of a to sheets of its neighbor.
class Workspace {
public:
    explicit Workspace(const QField& f)
        : field_(f),
          n_(f.n()),
          q_(f.q()),
          m_(f.m()),
          width_(static_cast<std::size_t>(f.q()) * f.m()) {
        const auto& g = f.grid();
        strides_.assign(n_, 1);
        for (int k = n_ - 2; k >= 0; --k)
            strides_[k] = strides_[k + 1] * static_cast<std::size_t>(g.dims[k + 1]);
        sigma_.assign(n_, std::vector<int>(f.node_count() * q_, 0));
        free_nodes_.reserve(f.node_count());
        for (std::size_t node = 0; node < f.node_count(); ++node)
            if (!f.is_boundary(node)) free_nodes_.push_back(node);
    }

    QField& field() { return field_; }
    const std::vector<std::size_t>& free_nodes() const { return free_nodes_; }

    // Recomputes every edge matching; returns the number that changed.
    std::size_t refresh_matchings() {
        const auto& g = field_.grid();
        std::size_t changed = 0;
        std::vector<int> idx(n_);
        int sig[8];
        for (std::size_t node = 0; node < field_.node_count(); ++node) {
            coords(node, idx);
            for (int k = 0; k < n_; ++k) {
                if (idx[k] + 1 >= g.dims[k]) continue;
                const std::size_t nb = node + strides_[k];
                match_raw(field_.raw(node), field_.raw(nb), q_, m_, sig);
                int* dst = sigma_[k].data() + node * q_;
                for (int j = 0; j < q_; ++j) {
                    if (dst[j] != sig[j]) ++changed;
                    dst[j] = sig[j];
                }
            }
        }
        return changed;
    }

    // Energy h^(n-2) * sum over edges of the matched squared distance.
    double matched_energy() const {
        const auto& g = field_.grid();
        double sum = 0.0;
        std::vector<int> idx(n_);
        for (std::size_t node = 0; node < field_.node_count(); ++node) {
            coords(node, idx);
            const auto a = field_.raw(node);
            for (int k = 0; k < n_; ++k) {
                if (idx[k] + 1 >= g.dims[k]) continue;
                const auto b = field_.raw(node + strides_[k]);
                const int* sig = sigma_[k].data() + node * q_;
                for (int j = 0; j < q_; ++j)
                    for (int c = 0; c < m_; ++c) {
                        const double d = a[j * m_ + c] - b[sig[j] * m_ + c];
                        sum += d * d;
                    }
            }
        }
        return std::pow(g.spacing, n_ - 2) * sum;
    }

    // One Gauss-Seidel pass: every free node's sheets are replaced by the
    // mean of their matched neighbor sheets (the exact per-node minimizer
    // under the current matchings).
    void gauss_seidel_pass(int iteration) {
        const auto& g = field_.grid();
        std::vector<int> idx(n_);
        Vec acc(width_);
        for (const std::size_t node : free_nodes_) {
            coords(node, idx);
            std::fill(acc.begin(), acc.end(), 0.0);
            int degree = 0;
            for (int k = 0; k < n_; ++k) {
                if (idx[k] + 1 < g.dims[k]) {  // neighbor in +k, edge at this node
                    const auto b = field_.raw(node + strides_[k]);
                    const int* sig = sigma_[k].data() + node * q_;
                    for (int j = 0; j < q_; ++j)
                        for (int c = 0; c < m_; ++c) acc[j * m_ + c] += b[sig[j] * m_ + c];
                    ++degree;
                }
                if (idx[k] > 0) {  // neighbor in -k, edge stored at the neighbor
                    const std::size_t nb = node - strides_[k];
                    const auto b = field_.raw(nb);
                    const int* sig = sigma_[k].data() + nb * q_;
                    // sig maps neighbor sheets to ours; accumulate its inverse.
                    for (int j = 0; j < q_; ++j)
                        for (int c = 0; c < m_; ++c) acc[sig[j] * m_ + c] += b[j * m_ + c];
                    ++degree;
                }
            }
            auto dst = field_.raw(node);
            const double inv = 1.0 / degree;
            for (std::size_t c = 0; c < width_; ++c) {
                dst[c] = acc[c] * inv;
                if (!std::isfinite(dst[c]))
                    throw numeric_failure("minimize: non-finite value at iteration " +
                                          std::to_string(iteration));
            }
        }
    }

private:
    void coords(std::size_t node, std::vector<int>& idx) const {
        for (int k = 0; k < n_; ++k) {
            idx[k] = static_cast<int>(node / strides_[k]);
            node %= strides_[k];
        }
    }

    QField field_;
    int n_, q_, m_;
    std::size_t width_;
    std::vector<std::size_t> strides_;
    std::vector<std::vector<int>> sigma_;  // per axis, node-major, q entries
    std::vector<std::size_t> free_nodes_;
};

// Boundary nodes ordered along the perimeter for n = 2 grids whose mask is
// the box ring; lexicographic otherwise. Matching propagation along this
// order turns the Q-valued datum into Q single-valued selections.
std::vector<std::size_t> boundary_walk(const QField& f) {
    const auto& g = f.grid();
    std::vector<std::size_t> order;
    if (g.n == 2) {
        const int nx = g.dims[0], ny = g.dims[1];
        auto push = [&](int i, int j) {
            const std::vector<int> idx = {i, j};
            const std::size_t node = f.node_index(idx);
            if (f.is_boundary(node)) order.push_back(node);
        };
        for (int i = 0; i < nx; ++i) push(i, 0);
        for (int j = 1; j < ny; ++j) push(nx - 1, j);
        for (int i = nx - 2; i >= 0; --i) push(i, ny - 1);
        for (int j = ny - 2; j >= 1; --j) push(0, j);
        if (order.size() == 2u * (nx + ny) - 4u) return order;
        order.clear();  // mask is not the plain box ring
    }
    for (std::size_t node = 0; node < f.node_count(); ++node)
        if (f.is_boundary(node)) order.push_back(node);
    return order;
}

// SOR solve of the discrete Laplace equation for one scalar component with
// Dirichlet data on the masked nodes.
void harmonic_extend_component(QField& f, int sheet, int comp,
                               const std::vector<std::size_t>& free_nodes) {
    const auto& g = f.grid();
    const int offset = sheet * f.m() + comp;

    double bsum = 0.0;
    std::size_t bcount = 0;
    for (std::size_t node = 0; node < f.node_count(); ++node)
        if (f.is_boundary(node)) {
            bsum += f.raw(node)[offset];
            ++bcount;
        }
    const double mean = bcount ? bsum / bcount : 0.0;
    for (const std::size_t node : free_nodes) f.raw(node)[offset] = mean;

    const int max_dim = *std::max_element(g.dims.begin(), g.dims.end());
    const double omega = 2.0 / (1.0 + std::sin(std::numbers::pi / max_dim));
    const int max_sweeps = 40 * max_dim;

    std::vector<std::size_t> strides(g.n, 1);
    for (int k = g.n - 2; k >= 0; --k)
        strides[k] = strides[k + 1] * static_cast<std::size_t>(g.dims[k + 1]);

    std::vector<int> idx(g.n);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_update = 0.0;
        for (const std::size_t node : free_nodes) {
            std::size_t rem = node;
            for (int k = 0; k < g.n; ++k) {
                idx[k] = static_cast<int>(rem / strides[k]);
                rem %= strides[k];
            }
            double acc = 0.0;
            int degree = 0;
            for (int k = 0; k < g.n; ++k) {
                if (idx[k] + 1 < g.dims[k]) {
                    acc += f.raw(node + strides[k])[offset];
                    ++degree;
                }
                if (idx[k] > 0) {
                    acc += f.raw(node - strides[k])[offset];
                    ++degree;
                }
            }
            double& v = f.raw(node)[offset];
            const double target = acc / degree;
            const double next = v + omega * (target - v);
            max_update = std::max(max_update, std::abs(next - v));
            v = next;
        }
        if (max_update < 1e-12) break;
    }
}

}  // namespace

void SolveOptions::validate() const {
    if (max_iters < 1) throw validation_error("solve: max_iters must be >= 1");
    if (!(energy_tol > 0.0)) throw validation_error("solve: energy_tol must be positive");
    if (rematch_every < 1) throw validation_error("solve: rematch_every must be >= 1");
}

SolveResult minimize(const QField& boundary, const SolveOptions& opts) {
    opts.validate();

    std::size_t fixed = 0;
    for (std::size_t node = 0; node < boundary.node_count(); ++node)
        if (boundary.is_boundary(node)) {
            ++fixed;
            if (!all_finite(boundary.raw(node)))
                throw validation_error("minimize: non-finite boundary values");
        }
    if (fixed == 0) throw validation_error("minimize: no fixed boundary nodes");
    if (fixed == boundary.node_count())
        return {boundary, total_energy(boundary), 0, {}};

    QField f = boundary;
    const int q = f.q(), m = f.m();

    // Initialization: seeded sheet relabeling at the walk start, greedy
    // matching propagation around the boundary, then per-sheet harmonic
    // extension of the selections.
    const auto walk = boundary_walk(f);
    {
        std::vector<int> relabel(q);
        std::iota(relabel.begin(), relabel.end(), 0);
        if (opts.seed != 0) {
            Rng rng(opts.seed);
            for (int i = q - 1; i > 0; --i)
                std::swap(relabel[i], relabel[rng.below(i + 1)]);
        }
        const QPoint first = f.value(walk.front());
        QPoint relabeled(q, m);
        for (int j = 0; j < q; ++j) {
            const auto src = first.sheet(relabel[j]);
            std::copy(src.begin(), src.end(), relabeled.sheet(j).begin());
        }
        f.set_value(walk.front(), relabeled);

        int sig[8];
        for (std::size_t i = 1; i < walk.size(); ++i) {
            const auto prev = f.raw(walk[i - 1]);
            const QPoint cur = f.value(walk[i]);
            match_raw(prev, cur.flat(), q, m, sig);
            QPoint permuted(q, m);
            for (int j = 0; j < q; ++j) {
                const auto src = cur.sheet(sig[j]);
                std::copy(src.begin(), src.end(), permuted.sheet(j).begin());
            }
            f.set_value(walk[i], permuted);
        }
    }

    Workspace ws(f);
    for (int sheet = 0; sheet < q; ++sheet)
        for (int comp = 0; comp < m; ++comp)
            harmonic_extend_component(ws.field(), sheet, comp, ws.free_nodes());

    ws.refresh_matchings();
    double energy = ws.matched_energy();

    SolveResult result;
    result.log.push_back({0, energy});

    int iters = 0;
    bool converged = false;
    while (iters < opts.max_iters && !converged) {
        std::size_t matching_changes = 0;
        const bool refreshed = (iters % opts.rematch_every == 0);
        if (refreshed) matching_changes = ws.refresh_matchings();
        ws.gauss_seidel_pass(iters);
        const double next = ws.matched_energy();
        ++iters;
        result.log.push_back({iters, next});

        const double decrease = energy - next;
        if (decrease < opts.energy_tol * std::max(std::abs(energy), 1e-30)) {
            // Converged only if a fresh matching pass cannot improve either.
            if (refreshed ? matching_changes == 0 : ws.refresh_matchings() == 0)
                converged = true;
        }
        energy = next;
    }

    result.field = ws.field();
    result.energy = total_energy(result.field);
    result.iters = iters;
    return result;
}

std::pair<QField, double> iterate_once(const QField& f) {
    Workspace ws(f);
    ws.refresh_matchings();
    ws.gauss_seidel_pass(0);
    QField out = ws.field();
    return {out, total_energy(out)};
}

}  // namespace qstrat
