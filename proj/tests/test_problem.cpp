#include <doctest.h>

#include <array>
#include <filesystem>
#include <random>

#include "lsot/exact.hpp"
#include "lsot/io.hpp"
#include "lsot/problem.hpp"

using namespace lsot;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Matrix mat(Index rows, Index cols, std::initializer_list<double> v) {
  Matrix M(rows, cols);
  auto it = v.begin();
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = *it++;
  return M;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an lsot::Error");
  return ErrorCode::io_error;
}

Matrix random_points(std::mt19937_64& rng, Index k, Index d) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix X(k, d);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < d; ++j) X(i, j) = u(rng);
  return X;
}

}  // namespace

TEST_CASE("validate_measure accepts normalized weights") {
  CHECK(validate_measure(vec({1.0})).size() == 1);
  const DiscreteMeasure u = validate_measure(vec({0.5, 0.5}));
  CHECK(u[0] == 0.5);
  CHECK(u[1] == 0.5);
}

TEST_CASE("validate_measure rejects bad weights") {
  CHECK(code_of([] { validate_measure(vec({0.5, 0.4})); }) == ErrorCode::not_normalized);
  CHECK(code_of([] { validate_measure(vec({1.5, -0.5})); }) == ErrorCode::negative_mass);
}

TEST_CASE("sqeuclidean_factored_cost on single points") {
  const CostMatrix zero = sqeuclidean_factored_cost(mat(1, 1, {0.0}), mat(1, 1, {0.0}));
  CHECK(zero.is_factored());
  CHECK(zero.inner_dim() == 3);
  CHECK(zero.entry(0, 0) == doctest::Approx(0.0));
  const CostMatrix nine = sqeuclidean_factored_cost(mat(1, 1, {0.0}), mat(1, 1, {3.0}));
  CHECK(nine.entry(0, 0) == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("sqeuclidean_factored_cost matches pairwise distances") {
  std::mt19937_64 rng(11);
  const Matrix X = random_points(rng, 5, 2), Y = random_points(rng, 5, 2);
  const CostMatrix C = sqeuclidean_factored_cost(X, Y);
  CHECK(C.inner_dim() == 4);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j)
      CHECK(std::abs(C.entry(i, j) - (X.row(i) - Y.row(j)).squaredNorm()) <= 1e-12);
  CHECK(code_of([&] { sqeuclidean_factored_cost(X, random_points(rng, 5, 3)); }) ==
        ErrorCode::dimension_mismatch);
}

TEST_CASE("gen_permutation_instance small cases") {
  const Instance one = gen_permutation_instance(1, 0);
  CHECK(one.cost().entry(0, 0) == 0.0);
  CHECK(solve_exact(one).value == 0.0);

  const std::array<int, 2> id{0, 1};
  const Instance two = permutation_instance(id);
  CHECK(two.cost().to_dense() == mat(2, 2, {0, 1, 1, 0}));
  const ExactSolution sol = solve_exact(two);
  CHECK(sol.value == 0.0);
  CHECK((sol.plan.entries() - mat(2, 2, {0.5, 0, 0, 0.5})).cwiseAbs().maxCoeff() <= 1e-15);

  const Instance three = gen_permutation_instance(3, 7);
  const ExactSolution s3 = solve_exact(three);
  CHECK(std::abs(s3.value) <= 1e-15);
  const Matrix C = three.cost().to_dense();
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) CHECK((s3.plan(i, j) > 1e-12) == (C(i, j) == 0.0));
  CHECK((three.p() - Vector::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("gen_planted_instance structure") {
  const PlantedInstance rank_one = gen_planted_instance(4, 5, 1, 0, 3);
  const Matrix pq = rank_one.instance.p() * rank_one.instance.q().transpose();
  CHECK((rank_one.plan - pq).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(solve_exact(rank_one.instance).value <= 1e-12);

  const PlantedInstance pl = gen_planted_instance(4, 4, 2, 3, 1);
  CHECK(solve_exact(pl.instance).value <= 1e-12);
  CHECK((pl.sparse.array() != 0.0).count() == 3);
  const auto& dec = *pl.instance.decomposition();
  CHECK((dec.W * dec.H.transpose() - pl.low_rank).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((dec.W.array() >= 0.0).all());
  CHECK((pl.low_rank + pl.sparse - pl.plan).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(pl.plan.sum() - 1.0) <= 1e-12);

  CHECK(code_of([] { gen_planted_instance(3, 3, 1, 10, 0); }) == ErrorCode::infeasible_sparsity);
}

TEST_CASE("generator marginals are valid measures") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance a = gen_points_instance(6, 4, 2, seed);
    const Instance b = gen_planted_instance(5, 6, 2, 4, seed).instance;
    const Instance c = gen_random_instance(3, 7, seed);
    for (const Instance* inst : {&a, &b, &c}) {
      CHECK_NOTHROW(validate_measure(inst->p()));
      CHECK_NOTHROW(validate_measure(inst->q()));
    }
  }
}

TEST_CASE("transport_cost examples") {
  const Matrix T = mat(2, 2, {0.5, 0, 0, 0.5});
  CHECK(transport_cost(CostMatrix::dense(mat(2, 2, {0, 1, 1, 0})), T) == 0.0);
  CHECK(transport_cost(CostMatrix::dense(mat(2, 2, {1, 0, 0, 1})), T) == 1.0);
  CHECK(code_of([&] { transport_cost(CostMatrix::dense(Matrix::Ones(3, 2)), T); }) ==
        ErrorCode::dimension_mismatch);
}

TEST_CASE("transport_cost factored matches dense") {
  std::mt19937_64 rng(5);
  for (Index m : {1, 6, 17, 64})
    for (Index n : {1, 5, 33, 64}) {
      const CostMatrix C = sqeuclidean_factored_cost(random_points(rng, m, 3), random_points(rng, n, 3));
      const Matrix T = (Matrix::Random(m, n).array() + 1.0).matrix();
      const double f = transport_cost(C, T);
      const double d = transport_cost(CostMatrix::dense(C.to_dense()), T);
      CHECK(std::abs(f - d) <= 1e-12 * std::max(1.0, std::abs(d)));
    }
}

TEST_CASE("marginal_residuals examples") {
  const Vector p = vec({0.2, 0.3, 0.5}), q = vec({0.6, 0.4});
  auto [r0, c0] = marginal_residuals(p * q.transpose(), p, q);
  CHECK(r0.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(c0.cwiseAbs().maxCoeff() <= 1e-15);
  auto [r1, c1] = marginal_residuals(Matrix::Zero(3, 2), p, q);
  CHECK(r1 == -p);
  CHECK(c1 == -q);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix T(3, 2);
  for (Index k = 0; k < T.size(); ++k) T.data()[k] = u(rng);
  auto [r, c] = marginal_residuals(T, p, q);
  for (Index i = 0; i < 3; ++i) {
    double s = 0.0;
    for (Index j = 1; j >= 0; --j) s += T(i, j);
    CHECK(std::abs(r[i] - (s - p[i])) <= 1e-12);
  }
  for (Index j = 0; j < 2; ++j) {
    double s = 0.0;
    for (Index i = 2; i >= 0; --i) s += T(i, j);
    CHECK(std::abs(c[j] - (s - q[j])) <= 1e-12);
  }
}

TEST_CASE("instance files round-trip bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "lsot_test_problem";
  std::filesystem::create_directories(dir);
  const Instance planted = gen_planted_instance(5, 4, 2, 3, 9).instance;
  const Instance points = gen_points_instance(6, 3, 2, 4);
  for (const Instance* inst : {&planted, &points}) {
    const auto path = dir / "inst.json";
    io::save_instance(path, *inst);
    const Instance back = io::load_instance(path);
    CHECK(back.p() == inst->p());
    CHECK(back.q() == inst->q());
    CHECK(back.cost().is_factored() == inst->cost().is_factored());
    CHECK(back.cost().to_dense() == inst->cost().to_dense());
    CHECK(back.info().name == inst->info().name);
    CHECK(back.decomposition().has_value() == inst->decomposition().has_value());
    if (inst->decomposition()) {
      CHECK(back.decomposition()->W == inst->decomposition()->W);
      CHECK(back.decomposition()->S == inst->decomposition()->S);
    }
  }
  const Matrix M = Matrix::Random(4, 3);
  io::save_csv_matrix(dir / "m.csv", M);
  CHECK(io::load_csv_matrix(dir / "m.csv") == M);
  std::filesystem::remove_all(dir);
}
