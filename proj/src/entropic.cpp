#include "lsot/entropic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lsot {

namespace {

std::vector<Index> positive_indices(const Vector& w) {
  std::vector<Index> idx;
  for (Index i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) idx.push_back(i);
  return idx;
}

Matrix take(const Matrix& M, const std::vector<Index>& rows,
            const std::vector<Index>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(static_cast<Index>(a), static_cast<Index>(b)) = M(rows[a], cols[b]);
  return out;
}

Vector take(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out[static_cast<Index>(a)] = v[idx[a]];
  return out;
}

Matrix scatter(const Matrix& small, Index m, Index n, const std::vector<Index>& rows,
               const std::vector<Index>& cols) {
  Matrix out = Matrix::Zero(m, n);
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(rows[a], cols[b]) = small(static_cast<Index>(a), static_cast<Index>(b));
  return out;
}

// Dinic max-flow on the bipartite support graph with real capacities.
class MaxFlow {
 public:
  explicit MaxFlow(int nodes) : head_(static_cast<std::size_t>(nodes), -1) {}

  void add(int from, int to, double cap) {
    edges_.push_back({to, head_[from], cap});
    head_[from] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({from, head_[to], 0.0});
    head_[to] = static_cast<int>(edges_.size()) - 1;
  }

  double run(int s, int t) {
    double total = 0.0;
    while (bfs(s, t)) {
      it_ = head_;
      while (true) {
        const double f = dfs(s, t, std::numeric_limits<double>::infinity());
        if (f <= kEps) break;
        total += f;
      }
    }
    return total;
  }

 private:
  static constexpr double kEps = 1e-18;
  struct Edge {
    int to;
    int next;
    double cap;
  };

  bool bfs(int s, int t) {
    level_.assign(head_.size(), -1);
    std::vector<int> queue = {s};
    level_[s] = 0;
    for (std::size_t k = 0; k < queue.size(); ++k) {
      for (int e = head_[queue[k]]; e >= 0; e = edges_[e].next) {
        if (edges_[e].cap > kEps && level_[edges_[e].to] < 0) {
          level_[edges_[e].to] = level_[queue[k]] + 1;
          queue.push_back(edges_[e].to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(int v, int t, double pushed) {
    if (v == t) return pushed;
    for (int& e = it_[v]; e >= 0; e = edges_[e].next) {
      Edge& edge = edges_[e];
      if (edge.cap <= kEps || level_[edge.to] != level_[v] + 1) continue;
      const double f = dfs(edge.to, t, std::min(pushed, edge.cap));
      if (f > kEps) {
        edge.cap -= f;
        edges_[e ^ 1].cap += f;
        return f;
      }
    }
    return 0.0;
  }

  std::vector<Edge> edges_;
  std::vector<int> head_;
  std::vector<int> it_;
  std::vector<int> level_;
};

}  // namespace

double entropy(const Matrix& T) {
  double h = 0.0;
  for (Index j = 0; j < T.cols(); ++j)
    for (Index i = 0; i < T.rows(); ++i) {
      const double t = T(i, j);
      if (t > 0.0) h -= t * (std::log(t) - 1.0);
    }
  return h;
}

double kl_divergence(const Matrix& T, const Matrix& X) {
  double kl = 0.0;
  for (Index j = 0; j < T.cols(); ++j)
    for (Index i = 0; i < T.rows(); ++i) {
      const double t = T(i, j), x = X(i, j);
      if (t > 0.0) {
        if (x <= 0.0) return std::numeric_limits<double>::infinity();
        kl += t * std::log(t / x) - t + x;
      } else {
        kl += x;
      }
    }
  return kl;
}

double default_eta(double epsilon, Index m, Index n) {
  return epsilon / (4.0 * std::log(static_cast<double>(std::max(m, n)) + 1.0));
}

SinkhornResult sinkhorn_solve(const Instance& inst, double eta, double tol,
                              Index max_iter, const SinkhornTrace& trace) {
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw Error(ErrorCode::invalid_params, "sinkhorn_solve: eta must be positive");
  const Index m = inst.m(), n = inst.n();
  const Matrix Cfull = inst.cost().to_dense();
  const std::vector<Index> rows = positive_indices(inst.p());
  const std::vector<Index> cols = positive_indices(inst.q());
  const Matrix C = take(Cfull, rows, cols);
  const Vector p = take(inst.p(), rows);
  const Vector q = take(inst.q(), cols);
  const Index mr = C.rows(), nr = C.cols();

  const bool log_domain = eta < 1e-2 * inst.cost().max_abs();

  Matrix K;
  Vector u = Vector::Ones(mr), v = Vector::Ones(nr);
  Vector f = Vector::Zero(mr), g = Vector::Zero(nr);
  if (!log_domain) {
    K = (-C / eta).array().exp().matrix();
    if ((K.rowwise().sum().array() <= 0.0).any() ||
        (K.colwise().sum().array() <= 0.0).any())
      throw Error(ErrorCode::numerical_underflow,
                  "sinkhorn_solve: kernel row or column underflows to zero");
  }
  const Vector log_p = p.array().log();
  const Vector log_q = q.array().log();

  auto current_plan = [&]() -> Matrix {
    if (!log_domain) return u.asDiagonal() * K * v.asDiagonal();
    Matrix P(mr, nr);
    for (Index j = 0; j < nr; ++j)
      for (Index i = 0; i < mr; ++i)
        P(i, j) = std::exp((f[i] + g[j] - C(i, j)) / eta);
    return P;
  };

  SinkhornResult best{TransportPlan(Matrix::Zero(m, n)), 0.0, eta, 0,
                      std::numeric_limits<double>::infinity()};
  for (Index it = 1; it <= max_iter; ++it) {
    if (!log_domain) {
      u = p.array() / (K * v).array();
      v = q.array() / (K.transpose() * u).array();
    } else {
      for (Index i = 0; i < mr; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < nr; ++j) mx = std::max(mx, (g[j] - C(i, j)) / eta);
        double s = 0.0;
        for (Index j = 0; j < nr; ++j) s += std::exp((g[j] - C(i, j)) / eta - mx);
        f[i] = eta * (log_p[i] - mx - std::log(s));
      }
      for (Index j = 0; j < nr; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Index i = 0; i < mr; ++i) mx = std::max(mx, (f[i] - C(i, j)) / eta);
        double s = 0.0;
        for (Index i = 0; i < mr; ++i) s += std::exp((f[i] - C(i, j)) / eta - mx);
        g[j] = eta * (log_q[j] - mx - std::log(s));
      }
    }
    Matrix P = scatter(current_plan(), m, n, rows, cols);
    if (!P.allFinite())
      throw Error(ErrorCode::numerical_underflow, "sinkhorn_solve: non-finite scaling");
    const double err = max_marginal_error(P, inst.p(), inst.q());
    const double value = Cfull.cwiseProduct(P).sum();
    if (trace) trace(it, err, value);
    if (err < best.marginal_error) {
      best = SinkhornResult{TransportPlan(std::move(P)), value, eta, it, err};
    }
    if (err <= tol) return best;
  }
  best.iterations = max_iter;
  throw SinkhornNonConvergence("sinkhorn_solve: iteration cap reached", best);
}

double support_max_flow(const Matrix& X, const Vector& p, const Vector& q) {
  const int m = static_cast<int>(X.rows()), n = static_cast<int>(X.cols());
  MaxFlow flow(m + n + 2);
  const int s = m + n, t = m + n + 1;
  for (int i = 0; i < m; ++i)
    if (p[i] > 0.0) flow.add(s, i, p[i]);
  for (int j = 0; j < n; ++j)
    if (q[j] > 0.0) flow.add(m + j, t, q[j]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (X(i, j) > 0.0) flow.add(i, m + j, std::numeric_limits<double>::infinity());
  return flow.run(s, t);
}

Projection sinkhorn_projection(const Matrix& X, const Vector& p, const Vector& q,
                               double tol, Index max_iter,
                               const ProjectionTrace& trace) {
  const Index m = X.rows(), n = X.cols();
  if (p.size() != m || q.size() != n)
    throw Error(ErrorCode::dimension_mismatch, "sinkhorn_projection: shape mismatch");
  if (!X.allFinite() || (X.array() < 0.0).any())
    throw Error(ErrorCode::negative_input, "sinkhorn_projection: X must be >= 0");

  // Cells in zero-mass rows or columns cannot carry mass.
  Matrix Y = X;
  for (Index i = 0; i < m; ++i)
    if (p[i] <= 0.0) Y.row(i).setZero();
  for (Index j = 0; j < n; ++j)
    if (q[j] <= 0.0) Y.col(j).setZero();

  bool dense_support = true;
  for (Index i = 0; i < m && dense_support; ++i)
    for (Index j = 0; j < n; ++j)
      if (p[i] > 0.0 && q[j] > 0.0 && !(Y(i, j) > 0.0)) {
        dense_support = false;
        break;
      }
  if (!dense_support && support_max_flow(Y, p, q) < 1.0 - 1e-9)
    throw Error(ErrorCode::infeasible_support,
                "sinkhorn_projection: support of X cannot carry the marginals");

  Vector d1 = Vector::Ones(m), d2 = Vector::Ones(n);
  if (max_marginal_error(Y, p, q) <= tol)
    return Projection{TransportPlan(Y), ScalingPair{d1, d2}, 0};
  Matrix P = Y;
  for (Index it = 1; it <= max_iter; ++it) {
    const Vector rs = Y * d2;
    for (Index i = 0; i < m; ++i) d1[i] = p[i] > 0.0 ? p[i] / rs[i] : 1.0;
    const Vector cs = Y.transpose() * d1;
    for (Index j = 0; j < n; ++j) d2[j] = q[j] > 0.0 ? q[j] / cs[j] : 1.0;
    P = d1.asDiagonal() * Y * d2.asDiagonal();
    if (!P.allFinite())
      throw Error(ErrorCode::numerical_underflow, "sinkhorn_projection: scaling overflow");
    if (trace) trace(it, P);
    if (max_marginal_error(P, p, q) <= tol)
      return Projection{TransportPlan(std::move(P)), ScalingPair{d1, d2}, it};
  }
  throw Error(ErrorCode::non_convergence, "sinkhorn_projection: iteration cap reached");
}

TransportPlan round_to_feasible(const Matrix& T, const Vector& p, const Vector& q) {
  if (T.rows() != p.size() || T.cols() != q.size())
    throw Error(ErrorCode::dimension_mismatch, "round_to_feasible: shape mismatch");
  if (!T.allFinite() || (T.array() < 0.0).any())
    throw Error(ErrorCode::negative_input, "round_to_feasible: T must be >= 0");
  Matrix F = T;
  const Vector rs = F.rowwise().sum();
  for (Index i = 0; i < F.rows(); ++i)
    if (rs[i] > p[i]) F.row(i) *= p[i] / rs[i];
  const Vector cs = F.colwise().sum().transpose();
  for (Index j = 0; j < F.cols(); ++j)
    if (cs[j] > q[j]) F.col(j) *= q[j] / cs[j];
  const Vector err_r = (p - F.rowwise().sum()).cwiseMax(0.0);
  const Vector err_c = (q - F.colwise().sum().transpose()).cwiseMax(0.0);
  const double mass = err_r.sum();
  if (mass > 0.0) F.noalias() += err_r * err_c.transpose() / mass;
  return TransportPlan(std::move(F));
}

}  // namespace lsot
