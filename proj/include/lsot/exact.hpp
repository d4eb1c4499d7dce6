#pragma once

#include "lsot/problem.hpp"

namespace lsot {

struct ExactSolution {
  TransportPlan plan;
  double value = 0.0;
  Index support_size = 0;  // strictly positive entries
  Index iterations = 0;    // simplex pivots
};

/// Largest m*n accepted by solve_exact.
inline constexpr Index kExactSizeGuard = 1'000'000;

/// Optimal vertex of the transportation polytope via the primal network
/// simplex on the bipartite graph (Bland's rule, perturbed supplies).
ExactSolution solve_exact(const Instance& inst);

/// Brute force over all spanning trees of K_{m,n}; requires m + n <= 9.
double oracle_tiny(const Instance& inst);

}  // namespace lsot
