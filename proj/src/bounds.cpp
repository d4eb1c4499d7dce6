#include "lsot/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lsot/entropic.hpp"

namespace lsot {

namespace {

double positive_part(double a) { return a > 0.0 ? a : 0.0; }

Index count_nonzeros(const Matrix& M) { return (M.array() != 0.0).count(); }

double max_abs(const Matrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Decomposition Decomposition::from_factors(Matrix W, Matrix H, Matrix S) {
  if (W.cols() != H.cols() || W.rows() != S.rows() || H.rows() != S.cols())
    throw Error(ErrorCode::dimension_mismatch, "decomposition: factor shapes disagree");
  if ((W.array() < 0.0).any() || (H.array() < 0.0).any())
    throw Error(ErrorCode::negative_input, "decomposition: factors must be nonnegative");
  Decomposition d;
  d.L_ = W * H.transpose();
  d.W_ = std::move(W);
  d.H_ = std::move(H);
  d.rho_star_ = count_nonzeros(S);
  d.S_ = std::move(S);
  return d;
}

Decomposition Decomposition::from_planted(const PlantedDecomposition& d) {
  return from_factors(d.W, d.H, d.S);
}

Decomposition Decomposition::sparse_only(const Matrix& T) {
  return from_factors(Matrix::Zero(T.rows(), 0), Matrix::Zero(T.cols(), 0), T);
}

double psi(double x, double delta) { return x > 0.0 ? std::log(x) : std::log(delta); }

double compute_delta(const Matrix& Z, const Matrix& Z_tilde) {
  auto min_positive = [](const Matrix& M) {
    double best = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < M.size(); ++k)
      if (M.data()[k] > 0.0) best = std::min(best, M.data()[k]);
    if (!std::isfinite(best))
      throw Error(ErrorCode::all_zero, "compute_delta: matrix has no positive entry");
    return best;
  };
  return std::exp(-2.0) * std::min(min_positive(Z), min_positive(Z_tilde));
}

Matrix best_sparse_truncation(const Matrix& S, Index rho) {
  const Index m = S.rows(), n = S.cols();
  std::vector<Index> order;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      if (S(i, j) != 0.0) order.push_back(i * n + j);
  if (rho >= static_cast<Index>(order.size())) return S;
  auto mag = [&](Index k) { return std::abs(S(k / n, k % n)); };
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return mag(a) > mag(b); });
  Matrix out = Matrix::Zero(m, n);
  for (Index t = 0; t < std::max<Index>(rho, 0); ++t) {
    const Index k = order[static_cast<std::size_t>(t)];
    out(k / n, k % n) = S(k / n, k % n);
  }
  return out;
}

std::pair<Matrix, Matrix> lowrank_truncation_factors(const Decomposition& dec, Index r) {
  const Index r_star = dec.r_star();
  if (r_star == 0 && count_nonzeros(dec.L()) > 0)
    throw Error(ErrorCode::no_certificate, "low-rank truncation needs a factor certificate");
  const Index m = dec.rows(), n = dec.cols();
  if (r >= r_star) return {dec.W(), dec.H()};
  if (r <= 0) return {Matrix::Zero(m, 0), Matrix::Zero(n, 0)};

  auto summand = [&](Index k) -> Matrix { return dec.W().col(k) * dec.H().col(k).transpose(); };
  std::vector<Index> keep;
  if (r_star <= 12) {
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << r_star); ++mask) {
      if (std::popcount(mask) != r) continue;
      Matrix approx = Matrix::Zero(m, n);
      for (Index k = 0; k < r_star; ++k)
        if (mask & (1u << k)) approx += summand(k);
      const double err = (dec.L() - approx).norm();
      if (err < best) {
        best = err;
        keep.clear();
        for (Index k = 0; k < r_star; ++k)
          if (mask & (1u << k)) keep.push_back(k);
      }
    }
  } else {
    std::vector<Index> order(static_cast<std::size_t>(r_star));
    std::iota(order.begin(), order.end(), 0);
    auto norm = [&](Index k) { return dec.W().col(k).norm() * dec.H().col(k).norm(); };
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return norm(a) > norm(b); });
    keep.assign(order.begin(), order.begin() + r);
  }
  Matrix W(m, r), H(n, r);
  for (Index k = 0; k < r; ++k) {
    W.col(k) = dec.W().col(keep[static_cast<std::size_t>(k)]);
    H.col(k) = dec.H().col(keep[static_cast<std::size_t>(k)]);
  }
  return {W, H};
}

Matrix lowrank_truncation_heuristic(const Decomposition& dec, Index r) {
  if (r >= dec.r_star() && dec.r_star() > 0) return dec.L();
  auto [W, H] = lowrank_truncation_factors(dec, r);
  if (W.cols() == 0) return Matrix::Zero(dec.rows(), dec.cols());
  return W * H.transpose();
}

BoundReport theorem_bound(const Decomposition& dec, Index r, Index rho, const CostMatrix& C,
                          BoundVariant variant) {
  if (C.rows() != dec.rows() || C.cols() != dec.cols())
    throw Error(ErrorCode::dimension_mismatch, "theorem_bound: cost shape mismatch");
  BoundReport rep;
  rep.variant = variant;
  rep.r = r;
  rep.rho = variant == BoundVariant::corollary2 ? 0 : rho;
  rep.r_star = dec.r_star();
  rep.rho_star = dec.rho_star();
  rep.U = std::max(max_abs(dec.L()), max_abs(dec.S()));

  const Matrix Z = dec.L() + dec.S();
  const Matrix L_tilde = lowrank_truncation_heuristic(dec, r);
  const double mn = static_cast<double>(dec.rows() * dec.cols());
  const double rank_term =
      positive_part(static_cast<double>(rep.r_star - r)) * std::sqrt(mn);
  double sparse_term;
  if (variant == BoundVariant::theorem1) {
    const Matrix S_tilde = best_sparse_truncation(dec.S(), rho);
    rep.delta = compute_delta(Z, L_tilde + S_tilde);
    sparse_term = positive_part(static_cast<double>(rep.rho_star - rho));
  } else {
    rep.delta = compute_delta(Z, L_tilde);
    sparse_term = static_cast<double>(rep.rho_star);
  }
  const double scale = rep.U * C.max_abs() / rep.delta;
  const double count = rank_term + sparse_term;
  rep.rhs = count > 0.0 ? scale * count : 0.0;
  rep.vacuous = rep.rhs > 1e3 * C.max_abs();
  return rep;
}

PsiGap lemma_psi_gap(const Matrix& T_star, const Matrix& Z_tilde, const Vector& p,
                     const Vector& q) {
  const Projection proj = sinkhorn_projection(Z_tilde, p, q, 1e-10, 100000);
  const double delta = compute_delta(T_star, Z_tilde);
  PsiGap gap;
  gap.lhs = (proj.plan.entries() - T_star).cwiseAbs().sum();
  for (Index j = 0; j < T_star.cols(); ++j)
    for (Index i = 0; i < T_star.rows(); ++i)
      gap.rhs = std::max(gap.rhs,
                         std::abs(psi(Z_tilde(i, j), delta) - psi(T_star(i, j), delta)));
  return gap;
}

}  // namespace lsot
