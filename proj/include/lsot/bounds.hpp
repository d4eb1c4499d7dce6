#pragma once

#include <utility>

#include "lsot/problem.hpp"

namespace lsot {

/// Split T* = L + S with a nonnegative factor certificate L = W H^T.
class Decomposition {
 public:
  /// Checks W, H >= 0. r_star is the number of certified rank-one summands.
  static Decomposition from_factors(Matrix W, Matrix H, Matrix S);
  static Decomposition from_planted(const PlantedDecomposition& d);
  /// L = 0, S = T; the certificate is empty.
  static Decomposition sparse_only(const Matrix& T);

  const Matrix& L() const { return L_; }
  const Matrix& S() const { return S_; }
  const Matrix& W() const { return W_; }
  const Matrix& H() const { return H_; }
  Index r_star() const { return W_.cols(); }
  Index rho_star() const { return rho_star_; }
  Index rows() const { return L_.rows(); }
  Index cols() const { return L_.cols(); }

 private:
  Decomposition() = default;
  Matrix L_, S_, W_, H_;
  Index rho_star_ = 0;
};

enum class BoundVariant { theorem1, corollary2 };

struct BoundReport {
  double U = 0.0;
  double delta = 0.0;
  double rhs = 0.0;
  Index r = 0;
  Index rho = 0;
  Index r_star = 0;
  Index rho_star = 0;
  BoundVariant variant = BoundVariant::theorem1;
  /// rhs exceeds 1e3 * max|C|, so the bound says nothing useful.
  bool vacuous = false;
};

/// log x for x > 0, log delta otherwise.
double psi(double x, double delta);

/// e^-2 times the smallest strictly positive entry over both matrices.
double compute_delta(const Matrix& Z, const Matrix& Z_tilde);

/// Keeps the rho largest-magnitude entries; ties go to the lower row-major index.
Matrix best_sparse_truncation(const Matrix& S, Index rho);

/// Sum of r of the certified rank-one summands of L. Exhaustive over subsets
/// when r* <= 12, otherwise drops the summands of smallest norm.
Matrix lowrank_truncation_heuristic(const Decomposition& dec, Index r);
/// The kept summands as factor columns (W~, H~) with W~ H~^T equal to the
/// heuristic's output.
std::pair<Matrix, Matrix> lowrank_truncation_factors(const Decomposition& dec, Index r);

BoundReport theorem_bound(const Decomposition& dec, Index r, Index rho, const CostMatrix& C,
                          BoundVariant variant = BoundVariant::theorem1);

struct PsiGap {
  double lhs = 0.0;  // || Proj(Z_tilde) - T* ||_1
  double rhs = 0.0;  // || psi(Z_tilde) - psi(T*) ||_inf
};

PsiGap lemma_psi_gap(const Matrix& T_star, const Matrix& Z_tilde, const Vector& p,
                     const Vector& q);

}  // namespace lsot
