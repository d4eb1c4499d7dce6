#include "lsot/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace lsot {

namespace {

void require_same(Index a, Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": " << a << " vs " << b;
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
}

Vector normalized(Vector w) { return w / w.sum(); }

Vector random_weights(std::mt19937_64& rng, int size, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector w(size);
  for (int i = 0; i < size; ++i) w[i] = dist(rng);
  return normalized(std::move(w));
}

// Nonnegative factor with roughly half of its entries nonzero and no empty
// row or column.
Matrix sparse_factor(std::mt19937_64& rng, int rows, int rank) {
  std::uniform_real_distribution<double> value(0.5, 1.5);
  std::bernoulli_distribution keep(0.5);
  std::uniform_int_distribution<int> pick_col(0, rank - 1);
  std::uniform_int_distribution<int> pick_row(0, rows - 1);
  Matrix W = Matrix::Zero(rows, rank);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < rank; ++k)
      if (keep(rng)) W(i, k) = value(rng);
  for (int i = 0; i < rows; ++i)
    if ((W.row(i).array() == 0.0).all()) W(i, pick_col(rng)) = value(rng);
  for (int k = 0; k < rank; ++k)
    if ((W.col(k).array() == 0.0).all()) W(pick_row(rng), k) = value(rng);
  return W;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::negative_mass: return "NegativeMass";
    case ErrorCode::not_normalized: return "NotNormalized";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::invalid_cost: return "InvalidCost";
    case ErrorCode::infeasible_sparsity: return "InfeasibleSparsity";
    case ErrorCode::size_guard_exceeded: return "SizeGuardExceeded";
    case ErrorCode::non_convergence: return "NonConvergence";
    case ErrorCode::numerical_underflow: return "NumericalUnderflow";
    case ErrorCode::infeasible_support: return "InfeasibleSupport";
    case ErrorCode::negative_input: return "NegativeInput";
    case ErrorCode::iteration_cap_reached: return "IterationCapReached";
    case ErrorCode::not_converged: return "NotConverged";
    case ErrorCode::non_finite: return "NonFinite";
    case ErrorCode::all_zero: return "AllZero";
    case ErrorCode::no_certificate: return "NoCertificate";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::invalid_params: return "InvalidParams";
    case ErrorCode::unknown_suite: return "UnknownSuite";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// DiscreteMeasure

DiscreteMeasure DiscreteMeasure::validate(const Vector& weights) {
  if (weights.size() == 0)
    throw Error(ErrorCode::dimension_mismatch, "measure has no atoms");
  for (Index i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i]) || weights[i] < 0.0) {
      std::ostringstream os;
      os << "weight " << i << " is " << weights[i];
      throw Error(ErrorCode::negative_mass, os.str());
    }
  }
  const double total = weights.sum();
  if (std::abs(total - 1.0) > kMassTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "weights sum to " << total;
    throw Error(ErrorCode::not_normalized, os.str());
  }
  // Sums already equal to one up to summation rounding are kept verbatim so
  // that validated weights stay fixed points (file round-trips are exact).
  Vector w = weights;
  const double rounding =
      4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(w.size());
  if (std::abs(total - 1.0) > rounding) w /= total;
  return DiscreteMeasure(std::move(w), std::nullopt);
}

DiscreteMeasure DiscreteMeasure::validate(const Vector& weights,
                                          Matrix support) {
  DiscreteMeasure mu = validate(weights);
  require_same(support.rows(), weights.size(), "support rows vs weights");
  mu.support_ = std::move(support);
  return mu;
}

// ---------------------------------------------------------------------------
// CostMatrix

CostMatrix CostMatrix::dense(Matrix entries) {
  if (!entries.allFinite())
    throw Error(ErrorCode::invalid_cost, "cost has non-finite entries");
  if (entries.size() > 0 && entries.minCoeff() < 0.0)
    throw Error(ErrorCode::invalid_cost, "dense cost has negative entries");
  CostMatrix c;
  c.factored_ = false;
  c.rows_ = entries.rows();
  c.cols_ = entries.cols();
  c.max_abs_ = entries.size() ? entries.cwiseAbs().maxCoeff() : 0.0;
  c.frobenius_ = entries.norm();
  c.dense_ = std::move(entries);
  return c;
}

CostMatrix CostMatrix::factored(Matrix E, Matrix F) {
  require_same(E.cols(), F.cols(), "factor inner dimensions");
  if (!E.allFinite() || !F.allFinite())
    throw Error(ErrorCode::invalid_cost, "cost factors have non-finite entries");
  CostMatrix c;
  c.factored_ = true;
  c.rows_ = E.rows();
  c.cols_ = F.rows();
  double max_abs = 0.0;
  double sq = 0.0;
  const Matrix Ft = F.transpose();
  for (Index i = 0; i < E.rows(); ++i) {
    const Eigen::RowVectorXd row = E.row(i) * Ft;
    if (!row.allFinite())
      throw Error(ErrorCode::invalid_cost, "factored cost overflows");
    if (row.size() && row.minCoeff() < -1e-10)
      throw Error(ErrorCode::invalid_cost, "factored cost has negative entries");
    if (row.size()) max_abs = std::max(max_abs, row.cwiseAbs().maxCoeff());
    sq += row.squaredNorm();
  }
  c.max_abs_ = max_abs;
  c.frobenius_ = std::sqrt(sq);
  c.E_ = std::move(E);
  c.F_ = std::move(F);
  return c;
}

Matrix CostMatrix::to_dense() const {
  if (!factored_) return dense_;
  return E_ * F_.transpose();
}

// ---------------------------------------------------------------------------
// TransportPlan / Instance

TransportPlan::TransportPlan(Matrix entries) : entries_(std::move(entries)) {
  if (!entries_.allFinite())
    throw Error(ErrorCode::negative_input, "plan has non-finite entries");
  if (entries_.size() && entries_.minCoeff() < 0.0)
    throw Error(ErrorCode::negative_input, "plan has negative entries");
}

Instance::Instance(DiscreteMeasure p, DiscreteMeasure q, CostMatrix cost,
                   InstanceInfo info,
                   std::optional<PlantedDecomposition> decomposition)
    : p_(std::move(p)),
      q_(std::move(q)),
      cost_(std::move(cost)),
      info_(std::move(info)),
      decomposition_(std::move(decomposition)) {
  require_same(cost_.rows(), p_.size(), "cost rows vs len(p)");
  require_same(cost_.cols(), q_.size(), "cost cols vs len(q)");
  if (decomposition_) {
    const auto& d = *decomposition_;
    require_same(d.W.rows(), p_.size(), "certificate W rows");
    require_same(d.H.rows(), q_.size(), "certificate H rows");
    require_same(d.W.cols(), d.H.cols(), "certificate rank");
    require_same(d.S.rows(), p_.size(), "certificate S rows");
    require_same(d.S.cols(), q_.size(), "certificate S cols");
  }
}

// ---------------------------------------------------------------------------
// Generators

CostMatrix sqeuclidean_factored_cost(const Matrix& X, const Matrix& Y) {
  require_same(X.cols(), Y.cols(), "point dimensions");
  if (!X.allFinite() || !Y.allFinite())
    throw Error(ErrorCode::invalid_cost, "non-finite coordinates");
  const Index d = X.cols();
  Matrix E(X.rows(), d + 2);
  Matrix F(Y.rows(), d + 2);
  E.col(0) = X.rowwise().squaredNorm();
  E.col(1).setOnes();
  E.rightCols(d) = -2.0 * X;
  F.col(0).setOnes();
  F.col(1) = Y.rowwise().squaredNorm();
  F.rightCols(d) = Y;
  return CostMatrix::factored(std::move(E), std::move(F));
}

Instance permutation_instance(std::span<const int> perm) {
  const int n = static_cast<int>(perm.size());
  if (n < 1) throw Error(ErrorCode::invalid_params, "permutation is empty");
  Matrix C = Matrix::Ones(n, n);
  for (int i = 0; i < n; ++i) C(i, perm[i]) = 0.0;
  const Vector uniform = Vector::Constant(n, 1.0 / n);
  return Instance(DiscreteMeasure::validate(uniform),
                  DiscreteMeasure::validate(uniform),
                  CostMatrix::dense(std::move(C)),
                  InstanceInfo{"permutation-" + std::to_string(n), {}});
}

Instance gen_permutation_instance(int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_params, "n must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Instance base = permutation_instance(perm);
  return Instance(base.p_measure(), base.q_measure(), base.cost(),
                  InstanceInfo{base.info().name,
                               static_cast<std::int64_t>(seed)});
}

PlantedInstance gen_planted_instance(int m, int n, int r_star, int rho_star,
                                     std::uint64_t seed) {
  if (m < 1 || n < 1)
    throw Error(ErrorCode::invalid_params, "m and n must be >= 1");
  if (r_star < 1 || r_star > std::min(m, n))
    throw Error(ErrorCode::invalid_params, "r_star must lie in [1, min(m,n)]");
  if (rho_star < 0)
    throw Error(ErrorCode::invalid_params, "rho_star must be >= 0");
  if (static_cast<long long>(rho_star) > static_cast<long long>(m) * n)
    throw Error(ErrorCode::infeasible_sparsity, "rho_star exceeds m*n");

  std::mt19937_64 rng(seed);
  Matrix W = sparse_factor(rng, m, r_star);
  Matrix H = sparse_factor(rng, n, r_star);

  std::vector<int> cells(static_cast<std::size_t>(m) * n);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::uniform_real_distribution<double> value(0.5, 1.5);
  Matrix S = Matrix::Zero(m, n);
  for (int k = 0; k < rho_star; ++k) S(cells[k] / n, cells[k] % n) = value(rng);

  const double total = (W * H.transpose()).sum() + S.sum();
  W /= total;
  S /= total;
  const Matrix L = W * H.transpose();
  const Matrix T = L + S;

  std::uniform_real_distribution<double> cost(0.1, 1.0);
  Matrix C(m, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) C(i, j) = T(i, j) > 0.0 ? 0.0 : cost(rng);

  Instance inst(DiscreteMeasure::validate(T.rowwise().sum()),
                DiscreteMeasure::validate(T.colwise().sum().transpose()),
                CostMatrix::dense(std::move(C)),
                InstanceInfo{"planted", static_cast<std::int64_t>(seed)},
                PlantedDecomposition{W, H, S});
  return PlantedInstance{std::move(inst), T, L, S};
}

Instance gen_points_instance(int m, int n, int d, std::uint64_t seed) {
  if (m < 1 || n < 1 || d < 1)
    throw Error(ErrorCode::invalid_params, "m, n, d must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, 1.0);
  Matrix X(m, d), Y(n, d);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) X(i, k) = coord(rng);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < d; ++k) Y(j, k) = coord(rng);
  Vector p = random_weights(rng, m, 0.5, 1.5);
  Vector q = random_weights(rng, n, 0.5, 1.5);
  CostMatrix C = sqeuclidean_factored_cost(X, Y);
  return Instance(DiscreteMeasure::validate(p, std::move(X)),
                  DiscreteMeasure::validate(q, std::move(Y)), std::move(C),
                  InstanceInfo{"points", static_cast<std::int64_t>(seed)});
}

Instance gen_random_instance(int m, int n, std::uint64_t seed) {
  if (m < 1 || n < 1)
    throw Error(ErrorCode::invalid_params, "m and n must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cost(0.0, 1.0);
  Matrix C(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) C(i, j) = cost(rng);
  Vector p = random_weights(rng, m, 0.1, 1.0);
  Vector q = random_weights(rng, n, 0.1, 1.0);
  return Instance(DiscreteMeasure::validate(p), DiscreteMeasure::validate(q),
                  CostMatrix::dense(std::move(C)),
                  InstanceInfo{"random", static_cast<std::int64_t>(seed)});
}

// ---------------------------------------------------------------------------

double transport_cost(const CostMatrix& C, const Matrix& T) {
  require_same(C.rows(), T.rows(), "cost rows vs plan rows");
  require_same(C.cols(), T.cols(), "cost cols vs plan cols");
  if (C.is_factored()) {
    // <E F^T, T> = trace(E^T T F)
    const Matrix TF = T * C.F();
    return C.E().cwiseProduct(TF).sum();
  }
  return C.dense_entries().cwiseProduct(T).sum();
}

std::pair<Vector, Vector> marginal_residuals(const Matrix& T, const Vector& p,
                                             const Vector& q) {
  require_same(T.rows(), p.size(), "plan rows vs len(p)");
  require_same(T.cols(), q.size(), "plan cols vs len(q)");
  return {T.rowwise().sum() - p, T.colwise().sum().transpose() - q};
}

double max_marginal_error(const Matrix& T, const Vector& p, const Vector& q) {
  const auto [r, c] = marginal_residuals(T, p, q);
  double e = 0.0;
  if (r.size()) e = std::max(e, r.cwiseAbs().maxCoeff());
  if (c.size()) e = std::max(e, c.cwiseAbs().maxCoeff());
  return e;
}

}  // namespace lsot
