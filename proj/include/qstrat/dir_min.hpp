#pragma once

// Numerical minimization of the discrete Dirichlet energy over Q-valued
// fields with fixed boundary data. Alternates exact Gauss-Seidel passes on
// node values (under fixed per-edge sheet matchings) with matching
// refreshes; both phases are nonincreasing in energy, so the method is a
// block-coordinate descent to a local minimum of the discrete energy.

#include <cstdint>
#include <vector>

#include "qstrat/qfield.hpp"

namespace qstrat {

struct SolveOptions {
    int max_iters = 100000;     // Gauss-Seidel sweeps
    double energy_tol = 1e-9;   // relative decrease per sweep to stop
    int rematch_every = 5;      // sweeps between matching refreshes
    std::uint64_t seed = 0;     // initial sheet relabeling

    void validate() const;
};

struct EnergyLogEntry {
    int iteration = 0;
    double energy = 0.0;
};

struct SolveResult {
    QField field;
    double energy = 0.0;  // h^(n-2) * sum of squared edge G-distances
    int iters = 0;
    std::vector<EnergyLogEntry> log;
};

// Minimizes the discrete energy with the boundary nodes of `boundary`
// (per its mask) held fixed. Interior values are initialized by
// harmonically extending each boundary sheet under a greedy matching
// propagated around the boundary. The energy sequence over sweeps is
// nonincreasing; iteration stops when the relative decrease over a sweep
// drops below energy_tol (with a final matching refresh) or at max_iters.
SolveResult minimize(const QField& boundary, const SolveOptions& opts = {});

// One sweep: refresh all edge matchings, then one Gauss-Seidel pass over
// the free nodes. Energy does not increase.
std::pair<QField, double> iterate_once(const QField& f);

}  // namespace qstrat
