#include "lsot/cost_operator.hpp"

#include <algorithm>
#include <numeric>

namespace lsot {

CostOperator::CostOperator(const CostMatrix& C) : C_(C) {}

Matrix CostOperator::times(const Matrix& M) const {
  if (C_.is_factored()) return C_.E() * (C_.F().transpose() * M);
  return C_.dense_entries() * M;
}

Matrix CostOperator::transpose_times(const Matrix& M) const {
  if (C_.is_factored()) return C_.F() * (C_.E().transpose() * M);
  return C_.dense_entries().transpose() * M;
}

double CostOperator::inner(const SparseBlock& S) const {
  double s = 0.0;
  for (const SparseEntry& e : S.entries()) s += entry(e.row, e.col) * e.value;
  return s;
}

void CostOperator::build_row_index() {
  const Index m = rows(), n = cols();
  sorted_values_.resize(static_cast<std::size_t>(m * n));
  sorted_cols_.resize(static_cast<std::size_t>(m * n));
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = entry(i, j);
    const std::size_t base = static_cast<std::size_t>(i * n);
    int* cols_begin = sorted_cols_.data() + base;
    std::iota(cols_begin, cols_begin + n, 0);
    std::stable_sort(cols_begin, cols_begin + n,
                     [&row](int a, int b) { return row[a] < row[b]; });
    for (Index k = 0; k < n; ++k) sorted_values_[base + k] = row[cols_begin[k]];
  }
}

}  // namespace lsot
