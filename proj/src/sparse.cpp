#include "lsot/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace lsot {

SparseBlock SparseBlock::from_dense(const Matrix& M) {
  SparseBlock S(M.rows(), M.cols());
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j)
      if (M(i, j) != 0.0) S.entries_.push_back({i, j, M(i, j)});
  return S;
}

SparseBlock SparseBlock::from_entries(Index rows, Index cols,
                                      std::vector<SparseEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseBlock S(rows, cols);
  for (const SparseEntry& e : entries) {
    if (!S.entries_.empty() && S.entries_.back().row == e.row && S.entries_.back().col == e.col)
      S.entries_.back().value += e.value;
    else
      S.entries_.push_back(e);
  }
  std::erase_if(S.entries_, [](const SparseEntry& e) { return e.value == 0.0; });
  return S;
}

double SparseBlock::at(Index i, Index j) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{i, j},
                             [](const SparseEntry& e, const std::pair<Index, Index>& key) {
                               return e.row != key.first ? e.row < key.first
                                                         : e.col < key.second;
                             });
  if (it != entries_.end() && it->row == i && it->col == j) return it->value;
  return 0.0;
}

Matrix SparseBlock::to_dense() const {
  Matrix M = Matrix::Zero(rows_, cols_);
  add_to(M);
  return M;
}

void SparseBlock::add_to(Matrix& M) const {
  for (const SparseEntry& e : entries_) M(e.row, e.col) += e.value;
}

Vector SparseBlock::row_sums() const {
  Vector s = Vector::Zero(rows_);
  for (const SparseEntry& e : entries_) s[e.row] += e.value;
  return s;
}

Vector SparseBlock::col_sums() const {
  Vector s = Vector::Zero(cols_);
  for (const SparseEntry& e : entries_) s[e.col] += e.value;
  return s;
}

Matrix SparseBlock::times(const Matrix& M) const {
  Matrix out = Matrix::Zero(rows_, M.cols());
  for (const SparseEntry& e : entries_) out.row(e.row) += e.value * M.row(e.col);
  return out;
}

Matrix SparseBlock::transpose_times(const Matrix& M) const {
  Matrix out = Matrix::Zero(cols_, M.cols());
  for (const SparseEntry& e : entries_) out.row(e.col) += e.value * M.row(e.row);
  return out;
}

double SparseBlock::squared_norm() const {
  double s = 0.0;
  for (const SparseEntry& e : entries_) s += e.value * e.value;
  return s;
}

double SparseBlock::max_abs() const {
  double s = 0.0;
  for (const SparseEntry& e : entries_) s = std::max(s, std::abs(e.value));
  return s;
}

bool operator==(const SparseBlock& a, const SparseBlock& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.entries_.size() != b.entries_.size())
    return false;
  for (std::size_t k = 0; k < a.entries_.size(); ++k) {
    const SparseEntry &x = a.entries_[k], &y = b.entries_[k];
    if (x.row != y.row || x.col != y.col || x.value != y.value) return false;
  }
  return true;
}

}  // namespace lsot
