#include <algorithm>
#include <chrono>
#include <cmath>

#include "engine.hpp"
#include "lsot/lsot.hpp"

namespace lsot {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BcdResult run_bcd(detail::Engine& engine, const Subproblem& sub, LsotVariables x,
                  double delta, Index max_iter, std::uint64_t seed, Index t, Index s,
                  Mode mode, const BcdObserver& observer) {
  const double step = 3.0 * sub.L_t;
  const int blocks = mode == Mode::lot ? 2 : 3;
  for (Index tau = 0;; ++tau) {
    const detail::Evaluation ev = engine.evaluate(x, sub.y, sub.beta, sub.anchor, sub.L_t,
                                                  sub.lambda);
    if (!std::isfinite(ev.value))
      throw Error(ErrorCode::non_finite, "bcd: objective is not finite at t=" +
                                             std::to_string(t) + ", s=" + std::to_string(s) +
                                             ", tau=" + std::to_string(tau));
    if (observer) observer(BcdStep{t, s, tau, ev.value, &x});
    const double stat = engine.stationarity(x, ev, sub.anchor, sub.L_t, sub.lambda);
    if (stat <= delta) return BcdResult{std::move(x), tau, stat};
    if (tau >= max_iter) throw IterationCapReached("bcd: iteration cap reached", std::move(x));
    const Block block = static_cast<Block>(sample_block(seed, t, s, tau, blocks));
    engine.step(block, x, ev, sub.anchor, sub.L_t, step, sub.lambda);
  }
}

void check_shapes(const LsotVariables& x, Index m, Index n, Index r) {
  if (x.A.rows() != m || x.A.cols() != r || x.B.rows() != n || x.B.cols() != r ||
      x.S.rows() != m || x.S.cols() != n)
    throw Error(ErrorCode::dimension_mismatch, "warm start has the wrong shape");
  if (!x.in_box()) throw Error(ErrorCode::invalid_config, "warm start leaves the box [0,1]");
}

}  // namespace

int sample_block(std::uint64_t seed, Index t, Index s, Index tau, int blocks) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(t));
  h = splitmix64(h ^ static_cast<std::uint64_t>(s));
  h = splitmix64(h ^ static_cast<std::uint64_t>(tau));
  return static_cast<int>(h % static_cast<std::uint64_t>(blocks));
}

void AlmConfig::validate(Index m, Index n) const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_config, what); };
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (!(beta0 > 0.0)) fail("beta0 must be positive");
  if (!(sigma > 1.0)) fail("sigma must exceed 1");
  if (!(w0 > 0.0)) fail("w0 must be positive");
  if (T_max < 1 || S_max < 1 || bcd_max_iter < 1) fail("iteration caps must be >= 1");
  if (lambda && !(*lambda >= 0.0)) fail("lambda must be nonnegative");
  if (r < 1 || r > std::min(m, n)) fail("rank must lie in [1, min(m, n)]");
}

BcdResult bcd(const Instance& inst, const Subproblem& sub, LsotVariables x0, double delta,
              Index max_iter, std::uint64_t seed, Index t, Index s, Mode mode,
              GradientPath path, const BcdObserver& observer) {
  detail::Engine engine(inst, path, mode);
  return run_bcd(engine, sub, std::move(x0), delta, max_iter, seed, t, s, mode, observer);
}

LsotVariables default_initial_point(const Vector& p, const Vector& q, Index r) {
  LsotVariables x = LsotVariables::zeros(p.size(), q.size(), r);
  const double kappa = std::sqrt(q.maxCoeff() / p.maxCoeff());
  x.A.col(0) = p * kappa;
  x.B.col(0) = q / kappa;
  x.A = x.A.cwiseMin(1.0);
  x.B = x.B.cwiseMin(1.0);
  return x;
}

double default_lambda(const Instance& inst, const LsotVariables& x0, double beta0, Index r) {
  const Index m = inst.m(), n = inst.n();
  const double L0 =
      smoothness_constant(Multipliers::zeros(m, n), beta0, inst.cost(), inst.p(), inst.q(), r).L;
  const Matrix S0 = x0.S.to_dense();
  std::vector<double> D(static_cast<std::size_t>(m * n));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      D[static_cast<std::size_t>(i * n + j)] = -inst.cost().entry(i, j) +
                                               beta0 * (inst.p()[i] + inst.q()[j]) +
                                               2.0 * L0 * S0(i, j);
  const std::size_t k = static_cast<std::size_t>(std::min(n * r, m * n));
  std::nth_element(D.begin(), D.begin() + static_cast<std::ptrdiff_t>(k - 1), D.end(),
                   std::greater<double>());
  return std::max(D[k - 1], 0.0);
}

SolveReport ialm(const Instance& inst, const AlmConfig& config,
                 const std::optional<LsotVariables>& warm_start, const SolverHooks& hooks) {
  const Index m = inst.m(), n = inst.n(), r = config.r;
  config.validate(m, n);
  const auto started = std::chrono::steady_clock::now();
  detail::Engine engine(inst, config.gradient_path, config.mode);

  LsotVariables x = warm_start ? *warm_start : default_initial_point(inst.p(), inst.q(), r);
  check_shapes(x, m, n, r);
  if (config.mode == Mode::lot) x.S = SparseBlock(m, n);

  const double lambda = config.mode == Mode::lot ? 0.0
                        : config.lambda          ? *config.lambda
                                                 : default_lambda(inst, x, config.beta0, r);

  Multipliers y = Multipliers::zeros(m, n);
  SolveReport report;
  report.lambda = lambda;
  double alpha_norm_1 = 0.0;
  Index s_total = 0;

  for (Index t = 0; t < config.T_max; ++t) {
    const double beta = config.beta0 * std::pow(config.sigma, static_cast<double>(t));
    const double L_t = smoothness_constant(y, beta, inst.cost(), inst.p(), inst.q(), r).L;

    LsotVariables xs = x;
    for (Index s = 0; s < config.S_max; ++s) {
      const LsotVariables anchor = xs;
      const Subproblem sub{y, beta, L_t, anchor, lambda};
      LsotVariables next;
      try {
        BcdResult res = run_bcd(engine, sub, xs, config.epsilon / 4.0, config.bcd_max_iter,
                                config.seed, t, s, config.mode, hooks.on_bcd_step);
        report.bcd_iters += res.steps;
        next = std::move(res.x);
      } catch (const IterationCapReached& cap) {
        report.bcd_iters += config.bcd_max_iter;
        next = cap.best();
      }
      ++s_total;
      const double moved = 2.0 * L_t * std::sqrt(squared_distance(next, anchor));
      xs = std::move(next);
      if (moved <= config.epsilon / 2.0) break;
    }

    const detail::Evaluation ev = engine.evaluate(xs, y, beta, xs, 0.0, lambda);
    const double feasibility = ev.alpha.norm();
    const double stationarity = engine.stationarity(xs, ev, xs, 0.0, lambda);
    if (!std::isfinite(feasibility) || !std::isfinite(stationarity))
      throw Error(ErrorCode::non_finite, "ialm: non-finite residuals at t=" + std::to_string(t));
    if (t == 0) alpha_norm_1 = feasibility;
    const double w_t = dual_stepsize(t, config.w0, alpha_norm_1, feasibility);

    TraceRow row;
    row.t = t;
    row.s_total = s_total;
    row.beta = beta;
    row.L_t = L_t;
    row.feasibility = feasibility;
    row.stationarity = stationarity;
    row.objective = transport_cost(inst.cost(), xs.plan());
    row.w_t = w_t;
    row.nnz_S = xs.S.nnz();
    row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now() - started)
                      .count();
    report.trace.push_back(row);
    if (hooks.on_outer) hooks.on_outer(row);

    report.outer_iters = t + 1;
    report.multipliers = y;
    report.beta = beta;
    if (feasibility <= config.epsilon && stationarity <= config.epsilon) {
      report.converged = true;
      x = std::move(xs);
      break;
    }

    const Vector direction = config.dual_update == DualUpdate::previous_iterate
                                 ? alpha_residuals(x, inst.p(), inst.q())
                                 : ev.alpha;
    y.y_p += w_t * direction.head(m);
    y.y_q += w_t * direction.tail(n);
    if (!y.y_p.allFinite() || !y.y_q.allFinite())
      throw Error(ErrorCode::non_finite, "ialm: multipliers are not finite");
    x = std::move(xs);
  }

  report.variables = x;
  const KktResiduals kkt = kkt_residuals(x, report.multipliers, report.beta, inst, lambda,
                                         config.mode, config.gradient_path);
  report.feasibility = kkt.feasibility;
  report.kkt_stationarity = kkt.stationarity;
  report.objective = transport_cost(inst.cost(), x.plan());
  if (!report.converged)
    throw NotConverged("ialm: no epsilon-KKT point within T_max outer iterations",
                       std::move(report));
  return report;
}

}  // namespace lsot
