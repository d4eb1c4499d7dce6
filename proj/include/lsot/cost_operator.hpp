#pragma once

#include <vector>

#include "lsot/problem.hpp"
#include "lsot/sparse.hpp"

namespace lsot {

/// Products with a cost matrix that never materialize a factored cost,
/// plus a per-row sorted index used to enumerate entries below a threshold.
class CostOperator {
 public:
  explicit CostOperator(const CostMatrix& C);

  Index rows() const { return C_.rows(); }
  Index cols() const { return C_.cols(); }
  const CostMatrix& cost() const { return C_; }

  double entry(Index i, Index j) const { return C_.entry(i, j); }
  /// C * M for an n x k matrix M.
  Matrix times(const Matrix& M) const;
  /// C^T * M for an m x k matrix M.
  Matrix transpose_times(const Matrix& M) const;
  /// <C, S>
  double inner(const SparseBlock& S) const;

  /// Sorts every row once; O(mn log n) time and O(mn) memory.
  void build_row_index();
  bool has_row_index() const { return !sorted_cols_.empty(); }

  /// Calls visit(j, C_ij) for the columns of row i in increasing cost order
  /// while C_ij < bound.
  template <class Visit>
  void for_each_below(Index i, double bound, Visit&& visit) const {
    const std::size_t base = static_cast<std::size_t>(i) * static_cast<std::size_t>(cols());
    for (Index k = 0; k < cols(); ++k) {
      const double c = sorted_values_[base + k];
      if (!(c < bound)) break;
      visit(static_cast<Index>(sorted_cols_[base + k]), c);
    }
  }

 private:
  const CostMatrix& C_;
  std::vector<double> sorted_values_;
  std::vector<int> sorted_cols_;
};

}  // namespace lsot
