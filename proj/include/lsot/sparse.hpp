#pragma once

#include <vector>

#include "lsot/types.hpp"

namespace lsot {

struct SparseEntry {
  Index row;
  Index col;
  double value;
};

/// m x n matrix stored as a row-major sorted coordinate list without
/// explicit zeros.
class SparseBlock {
 public:
  SparseBlock() = default;
  SparseBlock(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  static SparseBlock from_dense(const Matrix& M);
  /// Entries may come in any order; zeros are dropped, duplicates summed.
  static SparseBlock from_entries(Index rows, Index cols, std::vector<SparseEntry> entries);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(entries_.size()); }
  const std::vector<SparseEntry>& entries() const { return entries_; }

  /// Value at (i, j), zero when absent. O(log nnz).
  double at(Index i, Index j) const;

  Matrix to_dense() const;
  void add_to(Matrix& M) const;
  Vector row_sums() const;
  Vector col_sums() const;
  /// S * M for an n x k matrix M.
  Matrix times(const Matrix& M) const;
  /// S^T * M for an m x k matrix M.
  Matrix transpose_times(const Matrix& M) const;
  double squared_norm() const;
  double max_abs() const;

  friend bool operator==(const SparseBlock& a, const SparseBlock& b);

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<SparseEntry> entries_;
};

/// Linear index i * cols + j used for row-major ordering.
inline Index linear_index(const SparseEntry& e, Index cols) { return e.row * cols + e.col; }

}  // namespace lsot
