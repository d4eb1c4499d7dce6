#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lsot/lsot.hpp"
#include "lsot/verify.hpp"

using namespace lsot;

namespace {

Instance scalar_instance(double c) {
  Matrix C(1, 1);
  C << c;
  return Instance(validate_measure(Vector::Ones(1)), validate_measure(Vector::Ones(1)),
                  CostMatrix::dense(C));
}

Multipliers random_y(std::mt19937_64& rng, Index m, Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Multipliers y = Multipliers::zeros(m, n);
  for (Index i = 0; i < m; ++i) y.y_p[i] = u(rng);
  for (Index j = 0; j < n; ++j) y.y_q[j] = u(rng);
  return y;
}

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

double shrink_clamp(double z, double a) {
  const double v = z > a ? z - a : (z < -a ? z + a : 0.0);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

TEST_CASE("alpha_residuals examples") {
  const Instance inst = gen_random_instance(4, 3, 1);
  const Vector &p = inst.p(), &q = inst.q();
  LsotVariables x = LsotVariables::zeros(4, 3, 2);
  x.A.col(0) = p;
  x.B.col(0) = q;
  CHECK(alpha_residuals(x, p, q).cwiseAbs().maxCoeff() <= 1e-15);

  const Vector a0 = alpha_residuals(LsotVariables::zeros(4, 3, 2), p, q);
  CHECK(a0.head(4) == -p);
  CHECK(a0.tail(3) == -q);

  const LsotVariables z = random_interior_point(4, 3, 2, 5);
  const Matrix T = z.plan();
  const Vector a = alpha_residuals(z, p, q);
  for (Index i = 0; i < 4; ++i) CHECK(std::abs(a[i] - (T.row(i).sum() - p[i])) <= 1e-12);
  for (Index j = 0; j < 3; ++j) CHECK(std::abs(a[4 + j] - (T.col(j).sum() - q[j])) <= 1e-12);
}

TEST_CASE("aug_lagrangian examples") {
  std::mt19937_64 rng(2);
  const Instance inst = gen_random_instance(4, 5, 3);
  const Vector &p = inst.p(), &q = inst.q();
  LsotVariables feasible = LsotVariables::zeros(4, 5, 1);
  feasible.A.col(0) = p;
  feasible.B.col(0) = q;
  const Multipliers y = random_y(rng, 4, 5);
  CHECK(std::abs(aug_lagrangian(feasible, y, 3.0, inst) -
                 transport_cost(inst.cost(), feasible.plan())) <= 1e-15);

  const double beta = 1.7;
  CHECK(aug_lagrangian(LsotVariables::zeros(4, 5, 1), Multipliers::zeros(4, 5), beta, inst) ==
        doctest::Approx(0.5 * beta * (p.squaredNorm() + q.squaredNorm())).epsilon(1e-15));

  const LsotVariables x = random_interior_point(4, 5, 2, 7);
  const Matrix T = x.plan();
  const Vector rr = T.rowwise().sum() - p, cr = T.colwise().sum().transpose() - q;
  const double oracle = inst.cost().to_dense().cwiseProduct(T).sum() +
                        0.5 * beta * (rr.squaredNorm() + cr.squaredNorm()) + y.y_p.dot(rr) +
                        y.y_q.dot(cr);
  CHECK(std::abs(aug_lagrangian(x, y, beta, inst) - oracle) <= 1e-12);
}

TEST_CASE("grad_blocks reduce to the linear term") {
  const Instance inst = gen_random_instance(5, 4, 4);
  const LsotVariables x = random_interior_point(5, 4, 2, 1);
  const GradBlocks g = grad_blocks(x, Multipliers::zeros(5, 4), 0.0, inst, x, 3.0);
  const Matrix C = inst.cost().to_dense();
  CHECK(max_abs_diff(g.A, C * x.B) <= 1e-14);
  CHECK(max_abs_diff(g.B, C.transpose() * x.A) <= 1e-14);
  CHECK(max_abs_diff(g.S, C) <= 1e-15);
}

TEST_CASE("grad_blocks at zero match closed form") {
  const Instance inst = gen_random_instance(3, 4, 6);
  const LsotVariables x = LsotVariables::zeros(3, 4, 2);
  const double beta = 2.0;
  const GradBlocks g = grad_blocks(x, Multipliers::zeros(3, 4), beta, inst, x, 1.0);
  CHECK(g.A.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.B.cwiseAbs().maxCoeff() == 0.0);
  Matrix expected = inst.cost().to_dense();
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) expected(i, j) -= beta * (inst.p()[i] + inst.q()[j]);
  CHECK(max_abs_diff(g.S, expected) <= 1e-15);
}

TEST_CASE("grad_blocks factored path matches dense path on 12x10") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 5; ++k) {
    const Instance inst = gen_points_instance(12, 10, 2, rng());
    const LsotVariables x = random_interior_point(12, 10, 3, rng());
    const LsotVariables anchor = random_interior_point(12, 10, 3, rng());
    const Multipliers y = random_y(rng, 12, 10);
    const GradBlocks d = grad_blocks(x, y, 1.3, inst, anchor, 4.0, GradientPath::dense);
    const GradBlocks f = grad_blocks(x, y, 1.3, inst, anchor, 4.0, GradientPath::factored);
    CHECK(max_abs_diff(d.A, f.A) <= 1e-10 * std::max(1.0, d.A.cwiseAbs().maxCoeff()));
    CHECK(max_abs_diff(d.B, f.B) <= 1e-10 * std::max(1.0, d.B.cwiseAbs().maxCoeff()));
    CHECK(max_abs_diff(d.S, f.S) <= 1e-10 * std::max(1.0, d.S.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("smoothness_constant closed forms") {
  const Instance one = scalar_instance(2.0);
  const Smoothness s = smoothness_constant(Multipliers::zeros(1, 1), 1.0, one.cost(), one.p(),
                                           one.q(), 1);
  // Both B entries are max(1, 1, sqrt(3)); L_c = 2 sqrt(2) sqrt(3) + 6.
  CHECK(s.B_u.size() == 2);
  CHECK(s.B_u[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(s.B_u[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(s.L_c == doctest::Approx(2.0 * std::sqrt(6.0) + 6.0).epsilon(1e-14));
  CHECK(s.L == doctest::Approx(2.0 * std::sqrt(2.0) + 2.0 * std::sqrt(6.0) + 6.0).epsilon(1e-14));

  const Instance inst = gen_random_instance(6, 4, 2);
  std::mt19937_64 rng(3);
  const Multipliers y = random_y(rng, 6, 4);
  const double r = 2;
  const double tiny = smoothness_constant(Multipliers::zeros(6, 4), 1e-300, inst.cost(),
                                          inst.p(), inst.q(), 2)
                          .L;
  CHECK(tiny == doctest::Approx(std::sqrt(2.0 * r) * inst.cost().frobenius()).epsilon(1e-14));

  const Smoothness a = smoothness_constant(y, 1.5, inst.cost(), inst.p(), inst.q(), 2);
  const Smoothness b = smoothness_constant(y, 3.0, inst.cost(), inst.p(), inst.q(), 2);
  CHECK(b.L - a.L == doctest::Approx(1.5 * a.L_c).epsilon(1e-12));
}

TEST_CASE("prox_block examples") {
  const Matrix cur = Matrix::Constant(2, 3, 0.4);
  CHECK(prox_block(Block::A, Matrix::Zero(2, 3), cur, 5.0, 0.0) == cur);
  CHECK(prox_block(Block::S, Matrix::Zero(2, 3), cur, 5.0, 0.0) == cur);

  Matrix half(1, 1), zero(1, 1), nine(1, 1);
  half << 0.5;
  zero << 0.0;
  nine << 0.9;
  CHECK(prox_block(Block::S, zero, half, 1.0, 0.6)(0, 0) == 0.0);
  Matrix g(1, 1);
  g << -2.0;
  CHECK(prox_block(Block::A, g, nine, 2.0, 0.0)(0, 0) == 1.0);
  CHECK(prox_block(Block::B, -g, nine, 2.0, 0.0)(0, 0) == 0.0);
}

TEST_CASE("S step with 3L equals the one-third averaging form") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0), w(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const double L = 0.5 + 4.0 * u(rng), lambda = u(rng);
    const double s = u(rng), sbar = u(rng), W = w(rng);
    const double G = W + 2.0 * L * (s - sbar);
    const double via_prox = prox_sparse_entry(s, G, 3.0 * L, lambda);
    const double averaged =
        shrink_clamp(s / 3.0 + 2.0 * sbar / 3.0 - W / (3.0 * L), lambda / (3.0 * L));
    CHECK(std::abs(via_prox - averaged) <= 1e-14);
  }
}

TEST_CASE("kkt_residuals examples") {
  // Interior A coordinate with zero gradient: 1x1, r=1, C=0, y=0, feasible x.
  const Instance zero_cost = scalar_instance(0.0);
  LsotVariables x = LsotVariables::zeros(1, 1, 1);
  x.A(0, 0) = 0.5;
  x.B(0, 0) = 0.5;
  x.S = SparseBlock::from_dense(Matrix::Constant(1, 1, 0.75));
  const KktResiduals interior = kkt_residuals(x, Multipliers::zeros(1, 1), 1.0, zero_cost, 0.0);
  CHECK(interior.feasibility <= 1e-15);
  CHECK(interior.stationarity <= 1e-15);

  // s = 0 with -grad = lambda / 2 lies inside (-inf, lambda].
  const double lambda = 0.4;
  Matrix C(1, 1);
  C << 0.3;
  const Instance pos(validate_measure(Vector::Ones(1)), validate_measure(Vector::Ones(1)),
                     CostMatrix::dense(C));
  LsotVariables fz = LsotVariables::zeros(1, 1, 1);
  fz.A(0, 0) = 1.0;
  fz.B(0, 0) = 1.0;
  // grad_S = C + y_p + y_q = 0.3 - 0.5 = -0.2, so -grad = lambda / 2.
  Multipliers y = Multipliers::zeros(1, 1);
  y.y_p[0] = -0.25;
  y.y_q[0] = -0.25;
  const KktResiduals kz = kkt_residuals(fz, y, 1.0, pos, lambda);
  CHECK(kz.feasibility <= 1e-15);
  CHECK(kz.stationarity <= 1e-12);
}

TEST_CASE("kkt stationarity vanishes exactly at prox fixed points") {
  std::mt19937_64 rng(5);
  // Large costs make x = 0 stationary: every -grad lies in the normal cone.
  const Instance inst = gen_random_instance(4, 5, 9);
  const Instance heavy(inst.p_measure(), inst.q_measure(),
                       CostMatrix::dense(inst.cost().to_dense().array() + 10.0));
  const LsotVariables zero = LsotVariables::zeros(4, 5, 2);
  const Multipliers y0 = Multipliers::zeros(4, 5);
  CHECK(kkt_residuals(zero, y0, 1.0, heavy, 0.1).stationarity == 0.0);
  const GradBlocks g0 = grad_blocks(zero, y0, 1.0, heavy, zero, 0.0);
  CHECK(prox_block(Block::A, g0.A, zero.A, 1e8, 0.1) == zero.A);
  CHECK(prox_block(Block::B, g0.B, zero.B, 1e8, 0.1) == zero.B);
  CHECK(prox_block(Block::S, g0.S, zero.S.to_dense(), 1e8, 0.1) == zero.S.to_dense());

  for (int k = 0; k < 20; ++k) {
    const LsotVariables x = random_interior_point(4, 5, 2, rng());
    const Multipliers y = random_y(rng, 4, 5);
    const KktResiduals res = kkt_residuals(x, y, 1.0, inst, 0.1);
    const GradBlocks g = grad_blocks(x, y, 1.0, inst, x, 0.0);
    const double big = 1e8;
    const bool fixed = max_abs_diff(prox_block(Block::A, g.A, x.A, big, 0.1), x.A) <= 1e-10 &&
                       max_abs_diff(prox_block(Block::B, g.B, x.B, big, 0.1), x.B) <= 1e-10 &&
                       max_abs_diff(prox_block(Block::S, g.S, x.S.to_dense(), big, 0.1),
                                    x.S.to_dense()) <= 1e-10;
    CHECK((res.stationarity == 0.0) == fixed);
  }
}

TEST_CASE("kkt_residuals factored path matches dense path") {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 10; ++k) {
    const Instance inst = gen_points_instance(9, 7, 2, rng());
    LsotVariables x = random_interior_point(9, 7, 2, rng());
    Matrix S = x.S.to_dense();
    for (Index i = 0; i < S.size(); ++i)
      if (i % 3) S.data()[i] = 0.0;
    x.S = SparseBlock::from_dense(S);
    const Multipliers y = random_y(rng, 9, 7);
    for (double lambda : {0.0, 0.05, 2.0}) {
      const KktResiduals d = kkt_residuals(x, y, 2.0, inst, lambda, Mode::lsot, GradientPath::dense);
      const KktResiduals f =
          kkt_residuals(x, y, 2.0, inst, lambda, Mode::lsot, GradientPath::factored);
      CHECK(std::abs(d.feasibility - f.feasibility) <= 1e-12);
      CHECK(std::abs(d.stationarity - f.stationarity) <= 1e-10 * std::max(1.0, d.stationarity));
    }
  }
}

TEST_CASE("dual_stepsize fixtures") {
  CHECK(dual_stepsize(0, 0.7, 0.5, 0.5) == doctest::Approx(0.7));
  CHECK(dual_stepsize(0, 1.0, 0.2, 0.5) == doctest::Approx(0.4));
  const double l2 = std::log(2.0), l5 = std::log(5.0);
  CHECK(dual_stepsize(3, 2.0, 1.0, 0.1) ==
        doctest::Approx(2.0 * l2 * l2 * 1.0 / (4.0 * l5 * l5 * 0.1)));
  CHECK(dual_stepsize(5, 0.3, 1.0, 0.0) == 0.3);
  double prev = INFINITY;
  for (Index t = 1; t <= 100; ++t) {
    const double w = dual_stepsize(t, 1.0, 1e-3, 1.0);
    CHECK(w < prev);
    prev = w;
  }
}
