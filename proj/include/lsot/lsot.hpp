#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "lsot/problem.hpp"
#include "lsot/sparse.hpp"

namespace lsot {

enum class Mode { lsot, lot };
enum class GradientPath { dense, factored };
enum class Block { A = 0, B = 1, S = 2 };
/// Which iterate drives the multiplier step y += w_t * alpha(.).
enum class DualUpdate { previous_iterate, new_iterate };

/// Solver state x = (A, B, S) with every entry in [0, 1].
struct LsotVariables {
  Matrix A;  // m x r
  Matrix B;  // n x r
  SparseBlock S;

  static LsotVariables zeros(Index m, Index n, Index r);
  /// A B^T + S
  Matrix plan() const;
  Index m() const { return A.rows(); }
  Index n() const { return B.rows(); }
  Index r() const { return A.cols(); }
  bool in_box() const;
};

/// Squared Euclidean distance between two states.
double squared_distance(const LsotVariables& x, const LsotVariables& z);

struct Multipliers {
  Vector y_p;
  Vector y_q;

  static Multipliers zeros(Index m, Index n);
  double norm() const;
};

struct AlmConfig {
  double epsilon = 1e-2;
  double beta0 = 1.0;
  double sigma = 2.0;
  double w0 = 1.0;
  Index T_max = 50;
  Index S_max = 200;
  /// Block updates allowed per bcd call.
  Index bcd_max_iter = 100000;
  /// l1 weight; when unset it is derived from the data at t = 0.
  std::optional<double> lambda;
  Index r = 2;
  std::uint64_t seed = 0;
  Mode mode = Mode::lsot;
  GradientPath gradient_path = GradientPath::dense;
  DualUpdate dual_update = DualUpdate::previous_iterate;

  /// Throws invalid_config.
  void validate(Index m, Index n) const;
};

struct TraceRow {
  Index t = 0;
  Index s_total = 0;
  double beta = 0.0;
  double L_t = 0.0;
  double feasibility = 0.0;
  double stationarity = 0.0;
  double objective = 0.0;
  double w_t = 0.0;
  Index nnz_S = 0;
  std::int64_t wall_ns = 0;
};

struct SolveReport {
  LsotVariables variables;
  Multipliers multipliers;
  double beta = 0.0;
  double lambda = 0.0;
  double objective = 0.0;  // <C, A B^T + S>
  double feasibility = 0.0;
  double kkt_stationarity = 0.0;
  Index outer_iters = 0;
  Index bcd_iters = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

class IterationCapReached : public Error {
 public:
  IterationCapReached(const std::string& what, LsotVariables x)
      : Error(ErrorCode::iteration_cap_reached, what), x_(std::move(x)) {}
  /// Last iterate, which has the lowest G + h seen because bcd descends.
  const LsotVariables& best() const { return x_; }

 private:
  LsotVariables x_;
};

class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, SolveReport report)
      : Error(ErrorCode::not_converged, what), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

// ---------------------------------------------------------------------------
// Objective pieces. C enters through the instance; p and q are its marginals.

/// (A B^T 1 + S 1 - p ; B A^T 1 + S^T 1 - q)
Vector alpha_residuals(const LsotVariables& x, const Vector& p, const Vector& q);

double aug_lagrangian(const LsotVariables& x, const Multipliers& y, double beta,
                      const Instance& inst);

struct GradBlocks {
  Matrix A;
  Matrix B;
  Matrix S;
};

/// Partial gradients of L(x, y, beta) + L_t ||x - anchor||^2.
GradBlocks grad_blocks(const LsotVariables& x, const Multipliers& y, double beta,
                       const Instance& inst, const LsotVariables& anchor, double L_t,
                       GradientPath path = GradientPath::dense);

struct Smoothness {
  double L = 0.0;
  Vector B_u;  // length m + n
  double L_c = 0.0;
};

Smoothness smoothness_constant(const Multipliers& y, double beta, const CostMatrix& C,
                               const Vector& p, const Vector& q, Index r);

/// Closed-form proximal step: clamp for A and B, shrink-then-clamp for S.
Matrix prox_block(Block block, const Matrix& gradient, const Matrix& current, double step,
                  double lambda);

/// Scalar S update shared by the dense and sparse code paths.
inline double prox_sparse_entry(double current, double gradient, double step, double lambda) {
  const double z = current - gradient / step;
  const double a = lambda / step;
  double v = z > a ? z - a : (z < -a ? z + a : 0.0);
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

struct KktResiduals {
  double feasibility = 0.0;
  double stationarity = 0.0;
};

/// Residual norms; the S block is ignored in LOT mode.
KktResiduals kkt_residuals(const LsotVariables& x, const Multipliers& y, double beta,
                           const Instance& inst, double lambda, Mode mode = Mode::lsot,
                           GradientPath path = GradientPath::dense);

double dual_stepsize(Index t, double w0, double alpha_norm_1, double alpha_norm_tplus1);

/// Observer of every point visited by bcd, with the value of G + h there.
struct BcdStep {
  Index t = 0;
  Index s = 0;
  Index tau = 0;
  double objective = 0.0;
  const LsotVariables* x = nullptr;
};
using BcdObserver = std::function<void(const BcdStep&)>;

struct SolverHooks {
  BcdObserver on_bcd_step;
  std::function<void(const TraceRow&)> on_outer;
};

/// Subproblem G(x) = L(x, y, beta) + L_t ||x - anchor||^2 with regularizer h.
struct Subproblem {
  const Multipliers& y;
  double beta;
  double L_t;
  const LsotVariables& anchor;
  double lambda;
};

struct BcdResult {
  LsotVariables x;
  Index steps = 0;
  double stationarity = 0.0;
};

/// Randomized proximal block coordinate descent with step constant 3 L_t.
/// The block at step tau is drawn from a hash of (seed, t, s, tau).
BcdResult bcd(const Instance& inst, const Subproblem& sub, LsotVariables x0, double delta,
              Index max_iter, std::uint64_t seed, Index t = 0, Index s = 0,
              Mode mode = Mode::lsot, GradientPath path = GradientPath::dense,
              const BcdObserver& observer = {});

/// Default starting point: A B^T = p q^T in the first column, S = 0.
LsotVariables default_initial_point(const Vector& p, const Vector& q, Index r);

/// Largest n*r-th entry rule for the l1 weight, clamped at zero.
double default_lambda(const Instance& inst, const LsotVariables& x0, double beta0, Index r);

/// Inexact augmented Lagrangian method. Throws NotConverged when T_max outer
/// iterations pass without reaching epsilon-KKT.
SolveReport ialm(const Instance& inst, const AlmConfig& config,
                 const std::optional<LsotVariables>& warm_start = std::nullopt,
                 const SolverHooks& hooks = {});

/// Block index in {0, 1, 2} (or {0, 1}) from a counter-based hash.
int sample_block(std::uint64_t seed, Index t, Index s, Index tau, int blocks);

}  // namespace lsot
