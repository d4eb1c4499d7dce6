#pragma once

#include <functional>

#include "lsot/problem.hpp"

namespace lsot {

struct SinkhornResult {
  TransportPlan plan;
  double value = 0.0;
  double eta = 0.0;
  Index iterations = 0;
  double marginal_error = 0.0;  // max-norm of marginal_residuals(plan)
};

/// Thrown when the iteration cap is hit; holds the iterate with the smallest
/// marginal error seen.
class SinkhornNonConvergence : public Error {
 public:
  SinkhornNonConvergence(const std::string& what, SinkhornResult best)
      : Error(ErrorCode::non_convergence, what), best_(std::move(best)) {}
  const SinkhornResult& best() const { return best_; }

 private:
  SinkhornResult best_;
};

struct ScalingPair {
  Vector d1;
  Vector d2;
};

/// H(T) = -sum T_ij (log T_ij - 1), with 0 log 0 = 0.
double entropy(const Matrix& T);
inline double entropy(const TransportPlan& T) { return entropy(T.entries()); }

/// KL(T || X) = sum T_ij log(T_ij / X_ij) - T_ij + X_ij. Infinite when T
/// charges a zero of X.
double kl_divergence(const Matrix& T, const Matrix& X);

/// eta = epsilon / (4 log(max(m, n) + 1))
double default_eta(double epsilon, Index m, Index n);

/// Per-sweep observer: (iteration, marginal error, transport cost).
using SinkhornTrace = std::function<void(Index, double, double)>;

SinkhornResult sinkhorn_solve(const Instance& inst, double eta, double tol,
                              Index max_iter, const SinkhornTrace& trace = {});

/// Per-sweep observer for the projection: receives the current iterate.
using ProjectionTrace = std::function<void(Index, const Matrix&)>;

struct Projection {
  TransportPlan plan;
  ScalingPair scaling;
  Index sweeps = 0;
};

/// KL projection of X >= 0 onto the transport polytope, computed as
/// diag(d1) X diag(d2) by alternating scaling.
Projection sinkhorn_projection(const Matrix& X, const Vector& p, const Vector& q,
                               double tol, Index max_iter,
                               const ProjectionTrace& trace = {});

/// Repairs marginals of a nonnegative near-plan: rows and columns are scaled
/// down to at most p and q, and the deficit is added as a rank-one term.
TransportPlan round_to_feasible(const Matrix& T, const Vector& p, const Vector& q);

/// Mass that can be routed from p to q using only the positive cells of X.
double support_max_flow(const Matrix& X, const Vector& p, const Vector& q);

}  // namespace lsot
