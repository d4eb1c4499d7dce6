#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "lsot/error.hpp"
#include "lsot/types.hpp"

namespace lsot {

/// Tolerance on |sum(w) - 1| accepted when ingesting a probability vector.
inline constexpr double kMassTolerance = 1e-12;

/// Probability weights on a finite support, optionally with coordinates.
class DiscreteMeasure {
 public:
  /// Checks nonnegativity and normalization; weights within tolerance of
  /// unit mass are renormalized by their sum.
  static DiscreteMeasure validate(const Vector& weights);
  static DiscreteMeasure validate(const Vector& weights, Matrix support);

  const Vector& weights() const { return weights_; }
  Index size() const { return weights_.size(); }
  double operator[](Index i) const { return weights_[i]; }
  const std::optional<Matrix>& support() const { return support_; }

 private:
  DiscreteMeasure(Vector w, std::optional<Matrix> support)
      : weights_(std::move(w)), support_(std::move(support)) {}

  Vector weights_;
  std::optional<Matrix> support_;
};

inline DiscreteMeasure validate_measure(const Vector& w) {
  return DiscreteMeasure::validate(w);
}

/// Ground cost, either stored entrywise or as a factor pair C = E F^T.
class CostMatrix {
 public:
  static CostMatrix dense(Matrix entries);
  static CostMatrix factored(Matrix E, Matrix F);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool is_factored() const { return factored_; }
  /// Inner dimension of the factor pair (0 for dense storage).
  Index inner_dim() const { return factored_ ? E_.cols() : 0; }

  double entry(Index i, Index j) const {
    return factored_ ? E_.row(i).dot(F_.row(j)) : dense_(i, j);
  }

  /// Entrywise matrix; a copy for factored storage.
  Matrix to_dense() const;
  const Matrix& dense_entries() const { return dense_; }
  const Matrix& E() const { return E_; }
  const Matrix& F() const { return F_; }

  /// max_ij |C_ij|
  double max_abs() const { return max_abs_; }
  double frobenius() const { return frobenius_; }

 private:
  CostMatrix() = default;

  bool factored_ = false;
  Index rows_ = 0;
  Index cols_ = 0;
  Matrix dense_;
  Matrix E_;
  Matrix F_;
  double max_abs_ = 0.0;
  double frobenius_ = 0.0;
};

/// Nonnegative coupling matrix. Marginal accuracy is a property of the
/// producing operation, not of the type.
class TransportPlan {
 public:
  explicit TransportPlan(Matrix entries);

  const Matrix& entries() const { return entries_; }
  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

/// Planted factorization T* = W H^T + S stored alongside generated instances.
/// W, H are nonnegative; W H^T is the low-rank part.
struct PlantedDecomposition {
  Matrix W;
  Matrix H;
  Matrix S;

  Matrix low_rank() const { return W * H.transpose(); }
  Matrix plan() const { return low_rank() + S; }
};

struct InstanceInfo {
  std::string name;
  std::optional<std::int64_t> seed;
};

class Instance {
 public:
  Instance(DiscreteMeasure p, DiscreteMeasure q, CostMatrix cost,
           InstanceInfo info = {},
           std::optional<PlantedDecomposition> decomposition = std::nullopt);

  const DiscreteMeasure& p_measure() const { return p_; }
  const DiscreteMeasure& q_measure() const { return q_; }
  const Vector& p() const { return p_.weights(); }
  const Vector& q() const { return q_.weights(); }
  const CostMatrix& cost() const { return cost_; }
  const InstanceInfo& info() const { return info_; }
  const std::optional<PlantedDecomposition>& decomposition() const {
    return decomposition_;
  }
  Index m() const { return p_.size(); }
  Index n() const { return q_.size(); }

 private:
  DiscreteMeasure p_;
  DiscreteMeasure q_;
  CostMatrix cost_;
  InstanceInfo info_;
  std::optional<PlantedDecomposition> decomposition_;
};

struct PlantedInstance {
  Instance instance;
  Matrix plan;      // T*
  Matrix low_rank;  // L*
  Matrix sparse;    // S*
};

// Factored squared-Euclidean cost: rows of X and Y are points, the inner
// dimension is d + 2.
CostMatrix sqeuclidean_factored_cost(const Matrix& X, const Matrix& Y);

Instance permutation_instance(std::span<const int> perm);
Instance gen_permutation_instance(int n, std::uint64_t seed);
PlantedInstance gen_planted_instance(int m, int n, int r_star, int rho_star,
                                     std::uint64_t seed);
/// Random points in [0,1]^d with random weights and factored cost.
Instance gen_points_instance(int m, int n, int d, std::uint64_t seed);
/// Random weights and i.i.d. uniform dense costs in [0, 1).
Instance gen_random_instance(int m, int n, std::uint64_t seed);

double transport_cost(const CostMatrix& C, const Matrix& T);
inline double transport_cost(const CostMatrix& C, const TransportPlan& T) {
  return transport_cost(C, T.entries());
}

/// (T 1 - p, T^T 1 - q)
std::pair<Vector, Vector> marginal_residuals(const Matrix& T, const Vector& p,
                                             const Vector& q);

/// Max-norm of both marginal residual blocks.
double max_marginal_error(const Matrix& T, const Vector& p, const Vector& q);

}  // namespace lsot
