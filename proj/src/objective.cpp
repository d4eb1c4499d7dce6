#include <algorithm>
#include <cmath>

#include "engine.hpp"
#include "lsot/lsot.hpp"

namespace lsot {

LsotVariables LsotVariables::zeros(Index m, Index n, Index r) {
  return LsotVariables{Matrix::Zero(m, r), Matrix::Zero(n, r), SparseBlock(m, n)};
}

Matrix LsotVariables::plan() const {
  Matrix T = A * B.transpose();
  S.add_to(T);
  return T;
}

bool LsotVariables::in_box() const {
  auto ok = [](const Matrix& M) {
    return M.size() == 0 || (M.minCoeff() >= 0.0 && M.maxCoeff() <= 1.0);
  };
  if (!ok(A) || !ok(B)) return false;
  for (const SparseEntry& e : S.entries())
    if (!(e.value >= 0.0 && e.value <= 1.0)) return false;
  return true;
}

double squared_distance(const LsotVariables& x, const LsotVariables& z) {
  double d = (x.A - z.A).squaredNorm() + (x.B - z.B).squaredNorm();
  const auto& u = x.S.entries();
  const auto& v = z.S.entries();
  const Index n = x.S.cols();
  std::size_t a = 0, b = 0;
  while (a < u.size() || b < v.size()) {
    const Index ka = a < u.size() ? linear_index(u[a], n) : -1;
    const Index kb = b < v.size() ? linear_index(v[b], n) : -1;
    double diff;
    if (kb < 0 || (ka >= 0 && ka < kb)) {
      diff = u[a++].value;
    } else if (ka < 0 || kb < ka) {
      diff = v[b++].value;
    } else {
      diff = u[a++].value - v[b++].value;
    }
    d += diff * diff;
  }
  return d;
}

Multipliers Multipliers::zeros(Index m, Index n) {
  return Multipliers{Vector::Zero(m), Vector::Zero(n)};
}

double Multipliers::norm() const {
  return std::sqrt(y_p.squaredNorm() + y_q.squaredNorm());
}

Vector alpha_residuals(const LsotVariables& x, const Vector& p, const Vector& q) {
  const Index m = p.size(), n = q.size();
  Vector alpha(m + n);
  alpha.head(m) = x.A * x.B.colwise().sum().transpose() + x.S.row_sums() - p;
  alpha.tail(n) = x.B * x.A.colwise().sum().transpose() + x.S.col_sums() - q;
  return alpha;
}

double aug_lagrangian(const LsotVariables& x, const Multipliers& y, double beta,
                      const Instance& inst) {
  const Matrix T = x.plan();
  const Vector ar = T.rowwise().sum() - inst.p();
  const Vector ac = T.colwise().sum().transpose() - inst.q();
  return transport_cost(inst.cost(), T) + 0.5 * beta * (ar.squaredNorm() + ac.squaredNorm()) +
         y.y_p.dot(ar) + y.y_q.dot(ac);
}

GradBlocks grad_blocks(const LsotVariables& x, const Multipliers& y, double beta,
                       const Instance& inst, const LsotVariables& anchor, double L_t,
                       GradientPath path) {
  detail::Engine engine(inst, path, Mode::lsot);
  const detail::Evaluation ev = engine.evaluate(x, y, beta, anchor, L_t, 0.0);
  return GradBlocks{ev.GA, ev.GB, engine.dense_grad_S(x, ev, anchor, L_t)};
}

Smoothness smoothness_constant(const Multipliers& y, double beta, const CostMatrix& C,
                               const Vector& p, const Vector& q, Index r) {
  const Index m = p.size(), n = q.size();
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  const double dr = static_cast<double>(r);
  Smoothness out;
  out.B_u.resize(m + n);
  const double grad_row = std::sqrt(dr * dn * dn + dn * dr + dn);
  const double grad_col = std::sqrt(dr * dm * dm + dm * dr + dm);
  for (Index u = 0; u < m; ++u)
    out.B_u[u] = std::max(std::max(p[u], dn * (dr + 1.0) - p[u]), grad_row);
  for (Index v = 0; v < n; ++v)
    out.B_u[m + v] = std::max(std::max(q[v], dm * (dr + 1.0) - q[v]), grad_col);
  out.L_c = std::sqrt(2.0 * dn * dr) * out.B_u.head(m).sum() +
            std::sqrt(2.0 * dm * dr) * out.B_u.tail(n).sum() + out.B_u.squaredNorm();
  const double yn = std::sqrt(y.y_p.squaredNorm() + y.y_q.squaredNorm());
  out.L = std::sqrt(2.0 * dr) * C.frobenius() +
          std::sqrt(2.0 * dr) * (dm * std::sqrt(dn) + dn * std::sqrt(dm)) * yn + beta * out.L_c;
  return out;
}

Matrix prox_block(Block block, const Matrix& gradient, const Matrix& current, double step,
                  double lambda) {
  if (block != Block::S)
    return (current - gradient / step).cwiseMax(0.0).cwiseMin(1.0);
  Matrix out(current.rows(), current.cols());
  for (Index j = 0; j < current.cols(); ++j)
    for (Index i = 0; i < current.rows(); ++i)
      out(i, j) = prox_sparse_entry(current(i, j), gradient(i, j), step, lambda);
  return out;
}

KktResiduals kkt_residuals(const LsotVariables& x, const Multipliers& y, double beta,
                           const Instance& inst, double lambda, Mode mode,
                           GradientPath path) {
  detail::Engine engine(inst, path, mode);
  const detail::Evaluation ev = engine.evaluate(x, y, beta, x, 0.0, lambda);
  return KktResiduals{ev.alpha.norm(), engine.stationarity(x, ev, x, 0.0, lambda)};
}

double dual_stepsize(Index t, double w0, double alpha_norm_1, double alpha_norm_tplus1) {
  if (alpha_norm_tplus1 <= 0.0) return w0;
  const double l2 = std::log(2.0);
  const double lt = std::log(static_cast<double>(t) + 2.0);
  const double ratio = l2 * l2 * alpha_norm_1 /
                       ((static_cast<double>(t) + 1.0) * lt * lt * alpha_norm_tplus1);
  return w0 * std::min(1.0, ratio);
}

// ---------------------------------------------------------------------------

namespace detail {

double box_residual(double value, double g) {
  if (value <= 0.0) return std::max(g, 0.0);
  if (value >= 1.0) return std::max(-g, 0.0);
  return std::abs(g);
}

double sparse_residual(double value, double g, double lambda) {
  if (value <= 0.0) return std::max(g - lambda, 0.0);
  if (value >= 1.0) return std::max(lambda - g, 0.0);
  return std::abs(g - lambda);
}

Engine::Engine(const Instance& inst, GradientPath path, Mode mode)
    : inst_(inst), path_(path), mode_(mode), op_(inst.cost()) {
  if (path_ == GradientPath::dense && inst.cost().is_factored())
    materialized_ = inst.cost().to_dense();
  if (path_ == GradientPath::factored && mode_ == Mode::lsot) op_.build_row_index();
}

const Matrix& Engine::dense_cost() const {
  return inst_.cost().is_factored() ? materialized_ : inst_.cost().dense_entries();
}

Evaluation Engine::evaluate(const LsotVariables& x, const Multipliers& y, double beta,
                            const LsotVariables& anchor, double L_t, double lambda) {
  const Index m = inst_.m(), n = inst_.n();
  const Vector& p = inst_.p();
  const Vector& q = inst_.q();
  Evaluation ev;
  ev.alpha.resize(m + n);
  double linear = 0.0;

  if (path_ == GradientPath::dense) {
    const Matrix& C = dense_cost();
    Matrix T = x.A * x.B.transpose();
    x.S.add_to(T);
    ev.alpha.head(m) = T.rowwise().sum() - p;
    ev.alpha.tail(n) = T.colwise().sum().transpose() - q;
    ev.a = y.y_p + beta * ev.alpha.head(m);
    ev.b = y.y_q + beta * ev.alpha.tail(n);
    ev.W.resize(m, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) ev.W(i, j) = (C(i, j) + ev.a[i]) + ev.b[j];
    ev.GA = ev.W * x.B + 2.0 * L_t * (x.A - anchor.A);
    ev.GB = ev.W.transpose() * x.A + 2.0 * L_t * (x.B - anchor.B);
    linear = C.cwiseProduct(T).sum();
  } else {
    const Matrix CB = op_.times(x.B);
    const Matrix CtA = op_.transpose_times(x.A);
    const Vector colsum_B = x.B.colwise().sum().transpose();
    const Vector colsum_A = x.A.colwise().sum().transpose();
    ev.alpha.head(m) = x.A * colsum_B + x.S.row_sums() - p;
    ev.alpha.tail(n) = x.B * colsum_A + x.S.col_sums() - q;
    ev.a = y.y_p + beta * ev.alpha.head(m);
    ev.b = y.y_q + beta * ev.alpha.tail(n);
    ev.GA = CB + ev.a * colsum_B.transpose();
    ev.GA.rowwise() += (x.B.transpose() * ev.b).transpose();
    ev.GA += 2.0 * L_t * (x.A - anchor.A);
    ev.GB = CtA + ev.b * colsum_A.transpose();
    ev.GB.rowwise() += (x.A.transpose() * ev.a).transpose();
    ev.GB += 2.0 * L_t * (x.B - anchor.B);
    linear = x.A.cwiseProduct(CB).sum() + op_.inner(x.S);
    if (mode_ == Mode::lsot) collect_s_coords(x, anchor, lambda, ev);
  }

  const Vector ar = ev.alpha.head(m), ac = ev.alpha.tail(n);
  ev.lagrangian = linear + 0.5 * beta * ev.alpha.squaredNorm() + y.y_p.dot(ar) + y.y_q.dot(ac);
  double l1 = 0.0;
  for (const SparseEntry& e : x.S.entries()) l1 += e.value;
  ev.value = ev.lagrangian + (L_t > 0.0 ? L_t * squared_distance(x, anchor) : 0.0) +
             lambda * l1;
  return ev;
}

void Engine::collect_s_coords(const LsotVariables& x, const LsotVariables& anchor,
                              double lambda, Evaluation& ev) const {
  const Index m = inst_.m(), n = inst_.n();
  auto& out = ev.s_coords;
  const auto& u = x.S.entries();
  const auto& v = anchor.S.entries();
  std::size_t a = 0, b = 0;
  while (a < u.size() || b < v.size()) {
    const Index ka = a < u.size() ? linear_index(u[a], n) : -1;
    const Index kb = b < v.size() ? linear_index(v[b], n) : -1;
    if (kb < 0 || (ka >= 0 && ka < kb)) {
      out.push_back({u[a].row, u[a].col, u[a].value, 0.0, 0.0});
      ++a;
    } else if (ka < 0 || kb < ka) {
      out.push_back({v[b].row, v[b].col, 0.0, v[b].value, 0.0});
      ++b;
    } else {
      out.push_back({u[a].row, u[a].col, u[a].value, v[b].value, 0.0});
      ++a;
      ++b;
    }
  }
  for (SCoord& c : out) c.w = (op_.entry(c.row, c.col) + ev.a[c.row]) + ev.b[c.col];

  // Off-support cells with W_ij < -lambda, found through the sorted rows.
  const std::size_t explicit_count = out.size();
  const double b_min = n > 0 ? ev.b.minCoeff() : 0.0;
  std::size_t row_begin = 0;
  for (Index i = 0; i < m; ++i) {
    while (row_begin < explicit_count && out[row_begin].row < i) ++row_begin;
    std::size_t row_end = row_begin;
    while (row_end < explicit_count && out[row_end].row == i) ++row_end;
    const double bound = -lambda - ev.a[i] - b_min;
    const double slack = 1e-12 * (1.0 + std::abs(bound));
    op_.for_each_below(i, bound + slack, [&](Index j, double c) {
      const double w = (c + ev.a[i]) + ev.b[j];
      if (!(w < -lambda)) return;
      auto first = out.begin() + static_cast<std::ptrdiff_t>(row_begin);
      auto last = out.begin() + static_cast<std::ptrdiff_t>(row_end);
      auto it = std::lower_bound(first, last, j,
                                 [](const SCoord& sc, Index col) { return sc.col < col; });
      if (it != last && it->col == j) return;
      out.push_back({i, j, 0.0, 0.0, w});
    });
    row_begin = row_end;
  }
  if (out.size() > explicit_count)
    std::sort(out.begin(), out.end(), [](const SCoord& l, const SCoord& r) {
      return l.row != r.row ? l.row < r.row : l.col < r.col;
    });
}

double Engine::stationarity(const LsotVariables& x, const Evaluation& ev,
                            const LsotVariables& anchor, double L_t, double lambda) const {
  double sq = 0.0;
  for (Index k = 0; k < x.A.size(); ++k) {
    const double r = box_residual(x.A.data()[k], -ev.GA.data()[k]);
    sq += r * r;
  }
  for (Index k = 0; k < x.B.size(); ++k) {
    const double r = box_residual(x.B.data()[k], -ev.GB.data()[k]);
    sq += r * r;
  }
  if (mode_ == Mode::lsot) {
    if (path_ == GradientPath::dense) {
      const Matrix G = dense_grad_S(x, ev, anchor, L_t);
      const Matrix S = x.S.to_dense();
      for (Index j = 0; j < G.cols(); ++j)
        for (Index i = 0; i < G.rows(); ++i) {
          const double r = sparse_residual(S(i, j), -G(i, j), lambda);
          sq += r * r;
        }
    } else {
      for (const SCoord& c : ev.s_coords) {
        const double G = c.w + 2.0 * L_t * (c.s - c.sbar);
        const double r = sparse_residual(c.s, -G, lambda);
        sq += r * r;
      }
    }
  }
  return std::sqrt(sq);
}

Matrix Engine::dense_grad_S(const LsotVariables& x, const Evaluation& ev,
                            const LsotVariables& anchor, double L_t) const {
  const Index m = inst_.m(), n = inst_.n();
  Matrix W;
  if (path_ == GradientPath::dense) {
    W = ev.W;
  } else {
    W.resize(m, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) W(i, j) = (op_.entry(i, j) + ev.a[i]) + ev.b[j];
  }
  const Matrix S = x.S.to_dense();
  const Matrix Sbar = anchor.S.to_dense();
  Matrix G(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) G(i, j) = W(i, j) + 2.0 * L_t * (S(i, j) - Sbar(i, j));
  return G;
}

void Engine::step(Block block, LsotVariables& x, const Evaluation& ev,
                  const LsotVariables& anchor, double L_t, double step, double lambda) const {
  if (block == Block::A) {
    x.A = prox_block(Block::A, ev.GA, x.A, step, lambda);
    return;
  }
  if (block == Block::B) {
    x.B = prox_block(Block::B, ev.GB, x.B, step, lambda);
    return;
  }
  const Index m = inst_.m(), n = inst_.n();
  std::vector<SparseEntry> next;
  if (path_ == GradientPath::dense) {
    const Matrix S = x.S.to_dense();
    const Matrix Sbar = anchor.S.to_dense();
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) {
        const double s = S(i, j);
        const double G = ev.W(i, j) + 2.0 * L_t * (s - Sbar(i, j));
        const double v = prox_sparse_entry(s, G, step, lambda);
        if (v != 0.0) next.push_back({i, j, v});
      }
  } else {
    for (const SCoord& c : ev.s_coords) {
      const double G = c.w + 2.0 * L_t * (c.s - c.sbar);
      const double v = prox_sparse_entry(c.s, G, step, lambda);
      if (v != 0.0) next.push_back({c.row, c.col, v});
    }
  }
  x.S = SparseBlock::from_entries(m, n, std::move(next));
}

}  // namespace detail
}  // namespace lsot
