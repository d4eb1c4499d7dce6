#pragma once

#include <vector>

#include "lsot/cost_operator.hpp"
#include "lsot/lsot.hpp"

namespace lsot::detail {

/// One S coordinate that may move in the next S step: an entry of the
/// iterate, of the anchor, or an off-support cell whose gradient is below
/// -lambda.
struct SCoord {
  Index row;
  Index col;
  double s;     // current value
  double sbar;  // anchor value
  double w;     // (C_ij + a_i) + b_j
};

/// Everything the solver needs at one point: G + h, both factor gradients
/// and the S coordinates with their linear parts.
struct Evaluation {
  Vector alpha;  // m + n
  Vector a;      // y_p + beta alpha_rows
  Vector b;      // y_q + beta alpha_cols
  Matrix GA;
  Matrix GB;
  Matrix W;  // dense path only
  std::vector<SCoord> s_coords;  // factored path only
  double lagrangian = 0.0;       // L(x, y, beta)
  double value = 0.0;            // G + h
};

/// Evaluates G(x) = L(x, y, beta) + L_t ||x - anchor||^2 and h.
class Engine {
 public:
  Engine(const Instance& inst, GradientPath path, Mode mode);

  Evaluation evaluate(const LsotVariables& x, const Multipliers& y, double beta,
                      const LsotVariables& anchor, double L_t, double lambda);

  /// dist(-grad G, dh) as an l2 norm of coordinate residuals.
  double stationarity(const LsotVariables& x, const Evaluation& ev,
                      const LsotVariables& anchor, double L_t, double lambda) const;

  /// Proximal update of one block with constant `step`.
  void step(Block block, LsotVariables& x, const Evaluation& ev, const LsotVariables& anchor,
            double L_t, double step, double lambda) const;

  /// Dense gradient of G with respect to S.
  Matrix dense_grad_S(const LsotVariables& x, const Evaluation& ev,
                      const LsotVariables& anchor, double L_t) const;

  GradientPath path() const { return path_; }

 private:
  const Matrix& dense_cost() const;
  void collect_s_coords(const LsotVariables& x, const LsotVariables& anchor, double lambda,
                        Evaluation& ev) const;

  const Instance& inst_;
  GradientPath path_;
  Mode mode_;
  CostOperator op_;
  Matrix materialized_;
};

double box_residual(double value, double g);
double sparse_residual(double value, double g, double lambda);

}  // namespace lsot::detail
