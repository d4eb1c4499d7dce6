#include "lsot/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "lsot/entropic.hpp"
#include "lsot/exact.hpp"

namespace lsot {

namespace {

using json = nlohmann::json;

Vector random_vector(std::mt19937_64& rng, Index size, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v[i] = dist(rng);
  return v;
}

Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = dist(rng);
  return M;
}

Multipliers random_multipliers(std::mt19937_64& rng, Index m, Index n) {
  return Multipliers{random_vector(rng, m, -1.0, 1.0), random_vector(rng, n, -1.0, 1.0)};
}

LsotVariables random_box_point(std::mt19937_64& rng, Index m, Index n, Index r) {
  return LsotVariables{random_matrix(rng, m, r, 0.0, 1.0), random_matrix(rng, n, r, 0.0, 1.0),
                       SparseBlock::from_dense(random_matrix(rng, m, n, 0.0, 1.0))};
}

double relative_error(const Matrix& approx, const Matrix& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-12);
}

// Central differences of the augmented Lagrangian, one coordinate at a time.
GradBlocks finite_difference_gradient(const LsotVariables& x, const Multipliers& y,
                                      double beta, const Instance& inst, double h) {
  auto f = [&](const LsotVariables& z) { return aug_lagrangian(z, y, beta, inst); };
  GradBlocks g{Matrix(x.A.rows(), x.A.cols()), Matrix(x.B.rows(), x.B.cols()),
               Matrix(x.S.rows(), x.S.cols())};
  LsotVariables z = x;
  for (Index k = 0; k < x.A.size(); ++k) {
    const double v = x.A.data()[k];
    z.A.data()[k] = v + h;
    const double fp = f(z);
    z.A.data()[k] = v - h;
    const double fm = f(z);
    z.A.data()[k] = v;
    g.A.data()[k] = (fp - fm) / (2.0 * h);
  }
  for (Index k = 0; k < x.B.size(); ++k) {
    const double v = x.B.data()[k];
    z.B.data()[k] = v + h;
    const double fp = f(z);
    z.B.data()[k] = v - h;
    const double fm = f(z);
    z.B.data()[k] = v;
    g.B.data()[k] = (fp - fm) / (2.0 * h);
  }
  Matrix S = x.S.to_dense();
  for (Index j = 0; j < S.cols(); ++j)
    for (Index i = 0; i < S.rows(); ++i) {
      const double v = S(i, j);
      S(i, j) = v + h;
      z.S = SparseBlock::from_dense(S);
      const double fp = f(z);
      S(i, j) = v - h;
      z.S = SparseBlock::from_dense(S);
      const double fm = f(z);
      S(i, j) = v;
      g.S(i, j) = (fp - fm) / (2.0 * h);
    }
  return g;
}

void record(SuiteResult& res, bool ok) {
  ++res.cases;
  if (!ok) {
    ++res.failures;
    res.passed = false;
  }
}

}  // namespace

LsotVariables random_interior_point(Index m, Index n, Index r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return LsotVariables{random_matrix(rng, m, r, 0.1, 0.9), random_matrix(rng, n, r, 0.1, 0.9),
                       SparseBlock::from_dense(random_matrix(rng, m, n, 0.1, 0.9))};
}

SuiteResult verify_gradients(std::uint64_t seed, Index cases) {
  SuiteResult res{"gradients"};
  const Index m = 7, n = 5, r = 3;
  std::mt19937_64 rng(seed);
  double max_fd = 0.0, max_path = 0.0;
  for (Index c = 0; c < cases; ++c) {
    const std::uint64_t s = rng();
    const Instance inst = gen_random_instance(m, n, s);
    const LsotVariables x = random_interior_point(m, n, r, s + 1);
    const Multipliers y = random_multipliers(rng, m, n);
    const double beta = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    const GradBlocks g = grad_blocks(x, y, beta, inst, x, 0.0);
    const GradBlocks fd = finite_difference_gradient(x, y, beta, inst, 1e-6);
    const double err = std::max({relative_error(fd.A, g.A), relative_error(fd.B, g.B),
                                 relative_error(fd.S, g.S)});
    max_fd = std::max(max_fd, err);

    // Factored and dense paths on a factored cost, with a proximal anchor.
    const Instance pts = gen_points_instance(m, n, 1, s + 2);
    const LsotVariables anchor = random_interior_point(m, n, r, s + 3);
    const double L_t = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
    const GradBlocks gd = grad_blocks(x, y, beta, pts, anchor, L_t, GradientPath::dense);
    const GradBlocks gf = grad_blocks(x, y, beta, pts, anchor, L_t, GradientPath::factored);
    double path_err = 0.0;
    for (const auto& [a, b] : {std::pair{&gd.A, &gf.A}, {&gd.B, &gf.B}, {&gd.S, &gf.S}})
      path_err = std::max(path_err, (*a - *b).cwiseAbs().maxCoeff() /
                                        std::max(1.0, a->cwiseAbs().maxCoeff()));
    max_path = std::max(max_path, path_err);
    record(res, err <= 1e-5 && path_err <= 1e-10);
  }
  res.metrics = {{"max_rel_err", max_fd}, {"max_path_err", max_path}};
  return res;
}

SuiteResult verify_convexity(std::uint64_t seed, Index pairs) {
  SuiteResult res{"convexity"};
  const Index m = 7, n = 5, r = 3;
  std::mt19937_64 rng(seed);
  double worst_lower = 0.0, worst_upper = 0.0;
  for (Index c = 0; c < pairs; ++c) {
    const Instance inst = gen_random_instance(m, n, rng());
    const Multipliers y = random_multipliers(rng, m, n);
    const double beta = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    const double L = smoothness_constant(y, beta, inst.cost(), inst.p(), inst.q(), r).L;
    const LsotVariables anchor = random_box_point(rng, m, n, r);
    const LsotVariables x1 = random_box_point(rng, m, n, r);
    const LsotVariables x2 = random_box_point(rng, m, n, r);
    auto G = [&](const LsotVariables& x) {
      return aug_lagrangian(x, y, beta, inst) + L * squared_distance(x, anchor);
    };
    const double G1 = G(x1), G2 = G(x2);
    const GradBlocks g = grad_blocks(x1, y, beta, inst, anchor, L);
    const Matrix dS = x2.S.to_dense() - x1.S.to_dense();
    const double lin = G1 + g.A.cwiseProduct(x2.A - x1.A).sum() +
                       g.B.cwiseProduct(x2.B - x1.B).sum() + g.S.cwiseProduct(dS).sum();
    const double d2 = squared_distance(x2, x1);
    const double lower = lin + 0.5 * L * d2;
    const double upper = lin + 1.5 * L * d2;
    const double slack = 1e-8 * std::max({1.0, std::abs(G2), std::abs(lower), std::abs(upper)});
    worst_lower = std::max(worst_lower, (lower - G2) / slack);
    worst_upper = std::max(worst_upper, (G2 - upper) / slack);
    record(res, G2 >= lower - slack && G2 <= upper + slack);
  }
  res.metrics = {{"worst_lower_violation_in_slack_units", worst_lower},
                 {"worst_upper_violation_in_slack_units", worst_upper}};
  return res;
}

SuiteResult verify_projection(std::uint64_t seed, Index cases) {
  SuiteResult res{"projection"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(2, 8);
  std::bernoulli_distribution hole(0.25);
  double max_resid = 0.0, max_minor = 0.0;
  Index kl_violations = 0, zero_violations = 0, infeasible_skipped = 0;
  while (res.cases < cases) {
    const Index m = size(rng), n = size(rng);
    Vector pw = random_vector(rng, m, 0.1, 1.0);
    Vector qw = random_vector(rng, n, 0.1, 1.0);
    const Vector pp = pw / pw.sum(), qq = qw / qw.sum();
    Matrix X = random_matrix(rng, m, n, 0.0, 2.0);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j)
        if (hole(rng)) X(i, j) = 0.0;
    std::vector<Matrix> iterates;
    Projection proj{TransportPlan(Matrix::Zero(m, n)), {}, 0};
    try {
      proj = sinkhorn_projection(X, pp, qq, 1e-10, 100000,
                                 [&](Index, const Matrix& P) { iterates.push_back(P); });
    } catch (const Error& e) {
      if (e.code() == ErrorCode::infeasible_support) {
        ++infeasible_skipped;
        continue;
      }
      throw;
    }
    const Matrix& P = proj.plan.entries();
    const double resid = max_marginal_error(P, pp, qq);
    max_resid = std::max(max_resid, resid);
    bool zeros_ok = true;
    for (Index k = 0; k < X.size(); ++k)
      if (X.data()[k] == 0.0 && P.data()[k] != 0.0) zeros_ok = false;
    if (!zeros_ok) ++zero_violations;
    double minor = 0.0;
    for (Index i = 0; i < m; ++i)
      for (Index k = i + 1; k < m; ++k)
        for (Index j = 0; j < n; ++j)
          for (Index l = j + 1; l < n; ++l) {
            if (!(X(i, j) > 0 && X(k, l) > 0 && X(i, l) > 0 && X(k, j) > 0)) continue;
            if (!(P(i, j) > 0 && P(k, l) > 0 && P(i, l) > 0 && P(k, j) > 0)) continue;
            auto lr = [&](Index a, Index b) { return std::log(P(a, b) / X(a, b)); };
            minor = std::max(minor, std::abs(lr(i, j) + lr(k, l) - lr(i, l) - lr(k, j)));
          }
    max_minor = std::max(max_minor, minor);
    // Bregman property of the alternating scaling: the KL divergence from the
    // projection to the iterates never increases.
    bool kl_ok = true;
    double prev = std::numeric_limits<double>::infinity();
    for (const Matrix& it : iterates) {
      const double kl = kl_divergence(P, it);
      if (kl > prev + 1e-12 * std::max(1.0, prev)) kl_ok = false;
      prev = kl;
    }
    if (!kl_ok) ++kl_violations;
    record(res, resid <= 1e-8 && zeros_ok && minor <= 1e-8 && kl_ok);
  }
  res.metrics = {{"max_marginal_residual", max_resid},
                 {"max_log_ratio_minor", max_minor},
                 {"zero_pattern_violations", zero_violations},
                 {"kl_monotonicity_violations", kl_violations},
                 {"infeasible_supports_skipped", infeasible_skipped}};
  return res;
}

SuiteResult verify_oracle(std::uint64_t seed, Index cases) {
  SuiteResult res{"oracle"};
  std::mt19937_64 rng(seed);
  const auto start = std::chrono::steady_clock::now();
  double max_diff = 0.0;
  for (Index c = 0; c < cases; ++c) {
    const int m = std::uniform_int_distribution<int>(1, 5)(rng);
    const int n = std::uniform_int_distribution<int>(1, std::min(5, 9 - m))(rng);
    const Instance inst = gen_random_instance(m, n, rng());
    const double exact = solve_exact(inst).value;
    const double tiny = oracle_tiny(inst);
    max_diff = std::max(max_diff, std::abs(exact - tiny));
    record(res, std::abs(exact - tiny) <= 1e-9);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.metrics = {{"max_abs_diff", max_diff}, {"seconds", secs}, {"agreements", res.cases - res.failures}};
  return res;
}

SuiteResult verify_psi_lemma(std::uint64_t seed, Index cases) {
  SuiteResult res{"psi_lemma"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(4, 6);
  double worst_ratio = 0.0;
  Index skipped = 0, attempts = 0;
  while (res.cases < cases && attempts < 100 * cases) {
    ++attempts;
    const int m = size(rng), n = size(rng);
    const int r_star = std::uniform_int_distribution<int>(1, 3)(rng);
    const int rho_star = std::uniform_int_distribution<int>(1, 6)(rng);
    const PlantedInstance planted = gen_planted_instance(m, n, r_star, rho_star, rng());
    const Decomposition dec = Decomposition::from_planted(*planted.instance.decomposition());
    const int r = std::uniform_int_distribution<int>(0, r_star)(rng);
    const int rho = std::uniform_int_distribution<int>(0, rho_star)(rng);
    const Matrix Z = lowrank_truncation_heuristic(dec, r) + best_sparse_truncation(dec.S(), rho);
    PsiGap gap;
    try {
      gap = lemma_psi_gap(planted.plan, Z, planted.instance.p(), planted.instance.q());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::infeasible_support || e.code() == ErrorCode::all_zero) {
        ++skipped;
        continue;
      }
      throw;
    }
    if (gap.rhs > 0.0) worst_ratio = std::max(worst_ratio, gap.lhs / gap.rhs);
    record(res, gap.lhs <= gap.rhs * (1.0 + 1e-8));
  }
  if (res.cases < cases) res.passed = false;
  res.metrics = {{"worst_lhs_over_rhs", worst_ratio}, {"infeasible_or_empty_skipped", skipped}};
  return res;
}

SuiteResult verify_bounds(std::uint64_t seed) {
  SuiteResult res{"bounds"};
  std::mt19937_64 rng(seed);
  Index monotone_failures = 0, corollary_failures = 0, log_failures = 0, trunc_failures = 0;

  // Monotonicity of the Theorem 1 right-hand side over (r, rho) grids.
  for (int c = 0; c < 10; ++c) {
    const int r_star = 3, rho_star = 4;
    const PlantedInstance planted = gen_planted_instance(6, 6, r_star, rho_star, rng());
    const Decomposition dec = Decomposition::from_planted(*planted.instance.decomposition());
    const CostMatrix& C = planted.instance.cost();
    std::vector<std::vector<double>> rhs(r_star + 2, std::vector<double>(rho_star + 2, -1.0));
    for (int r = 0; r <= r_star + 1; ++r)
      for (int rho = 0; rho <= rho_star + 1; ++rho) {
        try {
          rhs[r][rho] = theorem_bound(dec, r, rho, C).rhs;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::all_zero) throw;
        }
      }
    bool ok = true;
    for (int r = 0; r <= r_star + 1; ++r)
      for (int rho = 0; rho <= rho_star + 1; ++rho) {
        if (rhs[r][rho] < 0) continue;
        if (r + 1 <= r_star + 1 && rhs[r + 1][rho] >= 0 && rhs[r + 1][rho] > rhs[r][rho])
          ok = false;
        if (rho + 1 <= rho_star + 1 && rhs[r][rho + 1] >= 0 && rhs[r][rho + 1] > rhs[r][rho])
          ok = false;
      }
    if (!ok) ++monotone_failures;
    record(res, ok);
  }

  // Vertex plans split as L = 0, S = T* give a zero bound once rho >= m + n - 1.
  for (int c = 0; c < 20; ++c) {
    const int m = std::uniform_int_distribution<int>(2, 8)(rng);
    const int n = std::uniform_int_distribution<int>(2, 8)(rng);
    const Instance inst = gen_random_instance(m, n, rng());
    const ExactSolution sol = solve_exact(inst);
    const Decomposition dec = Decomposition::sparse_only(sol.plan.entries());
    const BoundReport rep = theorem_bound(dec, 0, m + n - 1, inst.cost());
    const bool ok = dec.rho_star() <= m + n - 1 && rep.rhs == 0.0;
    if (!ok) ++corollary_failures;
    record(res, ok);
  }

  // |log a - log b| <= |a - b| / min(a, b)
  {
    std::uniform_real_distribution<double> expo(-20.0, 20.0);
    bool ok = true;
    for (int k = 0; k < 100000; ++k) {
      const double a = std::exp(expo(rng)), b = std::exp(expo(rng));
      const double lhs = std::abs(std::log(a) - std::log(b));
      const double rhs = std::abs(a - b) / std::min(a, b);
      if (lhs > rhs * (1.0 + 1e-12)) ok = false;
    }
    if (!ok) ++log_failures;
    record(res, ok);
  }

  // Truncation error chains.
  for (int c = 0; c < 20; ++c) {
    const PlantedInstance planted = gen_planted_instance(6, 5, 3, 5, rng());
    const Decomposition dec = Decomposition::from_planted(*planted.instance.decomposition());
    const double U = std::max(dec.L().cwiseAbs().maxCoeff(), dec.S().cwiseAbs().maxCoeff());
    bool ok = true;
    for (int rho = 0; rho <= 5; ++rho)
      if ((dec.S() - best_sparse_truncation(dec.S(), rho)).norm() >
          std::max(0, 5 - rho) * U * (1.0 + 1e-12))
        ok = false;
    for (int r = 0; r <= 3; ++r)
      if ((dec.L() - lowrank_truncation_heuristic(dec, r)).norm() >
          std::sqrt(30.0) * (3 - r) * dec.L().maxCoeff() * (1.0 + 1e-12))
        ok = false;
    if (!ok) ++trunc_failures;
    record(res, ok);
  }

  const SuiteResult psi = verify_psi_lemma(seed, 100);
  res.cases += psi.cases;
  res.failures += psi.failures;
  res.passed = res.passed && psi.passed;
  res.metrics = {{"monotonicity_failures", monotone_failures},
                 {"corollary1_failures", corollary_failures},
                 {"log_inequality_failures", log_failures},
                 {"truncation_failures", trunc_failures},
                 {"psi_lemma", psi.metrics},
                 {"psi_lemma_failures", psi.failures}};
  return res;
}

std::vector<SuiteResult> run_suites(const std::string& suite, std::uint64_t seed) {
  std::vector<SuiteResult> out;
  const bool all = suite == "all";
  if (!all && suite != "gradients" && suite != "convexity" && suite != "projection" &&
      suite != "oracle" && suite != "bounds")
    throw Error(ErrorCode::unknown_suite, "unknown suite '" + suite + "'");
  if (all || suite == "gradients") out.push_back(verify_gradients(seed));
  if (all || suite == "convexity") out.push_back(verify_convexity(seed));
  if (all || suite == "projection") out.push_back(verify_projection(seed));
  if (all || suite == "oracle") out.push_back(verify_oracle(seed));
  if (all || suite == "bounds") out.push_back(verify_bounds(seed));
  return out;
}

json suites_to_json(const std::vector<SuiteResult>& results) {
  json suites = json::array();
  bool passed = true;
  for (const SuiteResult& r : results) {
    passed = passed && r.passed;
    suites.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"cases", r.cases},
                      {"failures", r.failures},
                      {"metrics", r.metrics}});
  }
  return {{"passed", passed}, {"suites", suites}};
}

std::optional<LsotVariables> projected_state(const Matrix& W, const Matrix& H, const Matrix& S,
                                             const Vector& p, const Vector& q, Index r) {
  const Index m = p.size(), n = q.size();
  Matrix Z = S;
  if (W.cols() > 0) Z += W * H.transpose();
  Projection proj{TransportPlan(Matrix::Zero(m, n)), {}, 0};
  try {
    proj = sinkhorn_projection(Z, p, q, 1e-13, 100000);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::infeasible_support || e.code() == ErrorCode::non_convergence)
      return std::nullopt;
    throw;
  }
  const Vector& d1 = proj.scaling.d1;
  const Vector& d2 = proj.scaling.d2;
  LsotVariables x = LsotVariables::zeros(m, n, r);
  for (Index k = 0; k < std::min<Index>(W.cols(), r); ++k) {
    Vector a = d1.cwiseProduct(W.col(k));
    Vector b = d2.cwiseProduct(H.col(k));
    const double ma = a.maxCoeff(), mb = b.maxCoeff();
    if (ma > 0.0 && mb > 0.0) {
      const double c = std::sqrt(mb / ma);
      a *= c;
      b /= c;
    }
    x.A.col(k) = a;
    x.B.col(k) = b;
  }
  x.S = SparseBlock::from_dense(d1.asDiagonal() * S * d2.asDiagonal());
  if (!x.in_box()) return std::nullopt;
  return x;
}

GapMeasurement measure_gap(const Instance& inst, const Decomposition& dec, Index r, Index rho,
                           const AlmConfig& config, bool warm_start) {
  GapMeasurement out;
  out.ot = solve_exact(inst).value;
  AlmConfig cfg = config;
  cfg.r = r;
  std::optional<LsotVariables> x0;
  if (warm_start) {
    const auto [W, H] = lowrank_truncation_factors(dec, r);
    x0 = projected_state(W, H, best_sparse_truncation(dec.S(), rho), inst.p(), inst.q(), r);
  }
  out.warm_started = x0.has_value();
  SolveReport rep;
  try {
    rep = ialm(inst, cfg, x0);
    out.converged = true;
  } catch (const NotConverged& e) {
    rep = e.report();
  }
  out.bcd_iters = rep.bcd_iters;
  const LsotVariables& x = rep.variables;
  Matrix T = x.A * x.B.transpose() + best_sparse_truncation(x.S.to_dense(), rho);
  const TransportPlan rounded = round_to_feasible(T, inst.p(), inst.q());
  out.rounded_cost = transport_cost(inst.cost(), rounded);
  out.gap = out.rounded_cost - out.ot;
  return out;
}

}  // namespace lsot
