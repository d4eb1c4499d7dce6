#include <doctest.h>

#include <numeric>
#include <random>

#include "lsot/entropic.hpp"
#include "lsot/exact.hpp"

using namespace lsot;

namespace {

Instance dense_instance(const Matrix& C, const Vector& p, const Vector& q) {
  return Instance(validate_measure(p), validate_measure(q), CostMatrix::dense(C));
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix M(2, 2);
  M << a, b, c, d;
  return M;
}

Vector vec2(double a, double b) { return Vector{{a, b}}; }

bool is_forest(const Matrix& T) {
  const Index m = T.rows(), n = T.cols();
  std::vector<Index> parent(static_cast<std::size_t>(m + n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Index v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      if (T(i, j) > 0.0) {
        const Index a = find(i), b = find(m + j);
        if (a == b) return false;
        parent[a] = b;
      }
  return true;
}

}  // namespace

TEST_CASE("solve_exact on 2x2 fixtures") {
  const Vector h = vec2(0.5, 0.5);
  const ExactSolution diag = solve_exact(dense_instance(mat2(0, 1, 1, 0), h, h));
  CHECK(diag.value == 0.0);
  CHECK((diag.plan.entries() - mat2(0.5, 0, 0, 0.5)).cwiseAbs().maxCoeff() <= 1e-15);
  const ExactSolution anti = solve_exact(dense_instance(mat2(1, 0, 0, 1), h, h));
  CHECK(anti.value == 0.0);
  CHECK((anti.plan.entries() - mat2(0, 0.5, 0.5, 0)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("oracle_tiny examples") {
  Matrix C(1, 1);
  C << 2.5;
  CHECK(oracle_tiny(dense_instance(C, Vector::Ones(1), Vector::Ones(1))) == 2.5);

  // Row 1 sends 0.3 to column 1; row 2 covers the remaining 0.2 there at unit cost.
  const Instance skew = dense_instance(mat2(0, 1, 1, 0), vec2(0.3, 0.7), vec2(0.5, 0.5));
  CHECK(oracle_tiny(skew) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(solve_exact(skew).value == doctest::Approx(0.2).epsilon(1e-12));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int k = 0; k < 5; ++k) {
    Vector p(4);
    for (Index i = 0; i < 4; ++i) p[i] = u(rng);
    p /= p.sum();
    Matrix Cz(4, 4);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) Cz(i, j) = i == j ? 0.0 : u(rng);
    CHECK(oracle_tiny(dense_instance(Cz, p, p)) == doctest::Approx(0.0).scale(1e-15));
  }
}

TEST_CASE("size guards") {
  const Instance big = gen_random_instance(5, 5, 0);
  CHECK_THROWS_AS(oracle_tiny(big), Error);
  try {
    oracle_tiny(big);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::size_guard_exceeded);
  }
  const Instance huge = gen_permutation_instance(1001, 0);
  try {
    solve_exact(huge);
    FAIL("size guard not enforced");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::size_guard_exceeded);
  }
}

TEST_CASE("solve_exact agrees with oracle_tiny on random 4x4") {
  std::mt19937_64 rng(0);
  for (int k = 0; k < 50; ++k) {
    const Instance inst = gen_random_instance(4, 4, rng());
    CHECK(std::abs(solve_exact(inst).value - oracle_tiny(inst)) <= 1e-12);
  }
}

TEST_CASE("solve_exact returns a feasible vertex") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 40; ++k) {
    const int m = std::uniform_int_distribution<int>(1, 12)(rng);
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    const Instance inst = k % 2 ? gen_random_instance(m, n, rng())
                                : gen_planted_instance(m, n, 1, std::min(m * n, 3), rng()).instance;
    const ExactSolution sol = solve_exact(inst);
    const Matrix& T = sol.plan.entries();
    CHECK((T.array() >= 0.0).all());
    CHECK(max_marginal_error(T, inst.p(), inst.q()) <= 1e-10);
    CHECK(sol.support_size <= m + n - 1);
    CHECK(sol.support_size == (T.array() > 0.0).count());
    CHECK(is_forest(T));
    CHECK(std::abs(sol.value - transport_cost(inst.cost(), T)) <= 1e-12);
  }
}

TEST_CASE("solve_exact lower-bounds every feasible plan") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const Instance inst = gen_random_instance(6, 7, rng());
    const double ot = solve_exact(inst).value;
    CHECK(ot <= transport_cost(inst.cost(), inst.p() * inst.q().transpose()) + 1e-9);
    const SinkhornResult sk = sinkhorn_solve(inst, 0.05, 1e-9, 100000);
    const TransportPlan T = round_to_feasible(sk.plan.entries(), inst.p(), inst.q());
    CHECK(ot <= transport_cost(inst.cost(), T) + 1e-9);
  }
}

TEST_CASE("scaling the cost scales the value") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const Instance inst = gen_random_instance(5, 6, rng());
    const double lambda = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const Instance scaled(inst.p_measure(), inst.q_measure(),
                          CostMatrix::dense(lambda * inst.cost().to_dense()));
    const ExactSolution a = solve_exact(inst), b = solve_exact(scaled);
    CHECK(max_marginal_error(b.plan.entries(), inst.p(), inst.q()) <= 1e-10);
    CHECK(std::abs(b.value - lambda * a.value) <= 1e-9);
  }
}
