#include "lsot/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "engine.hpp"
#include "lsot/entropic.hpp"
#include "lsot/exact.hpp"
#include "lsot/io.hpp"

namespace lsot {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::invalid_params, what); }

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!obj.is_object()) bad(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end())
      bad(where + ": unknown key '" + key + "'");
  }
}

template <class T>
std::vector<T> list_of(const json& v, const std::string& key) {
  std::vector<T> out;
  try {
    if (v.is_array())
      for (const json& e : v) out.push_back(e.get<T>());
    else
      out.push_back(v.get<T>());
  } catch (const json::exception&) {
    bad("scenario: bad value for '" + key + "'");
  }
  return out;
}

Instance make_instance(const BenchGrid& g, Index m, Index n, std::uint64_t seed) {
  if (g.instance == "points") return gen_points_instance(m, n, g.d, seed);
  if (g.instance == "random") return gen_random_instance(m, n, seed);
  if (m != n) bad("scenario: permutation instances need m = n");
  return gen_permutation_instance(n, seed);
}

struct Cell {
  Index grid, m, n, r;
  double epsilon;
};

BenchRow run_cell(const BenchScenario& sc, const Cell& c) {
  const auto started = Clock::now();
  const BenchGrid& g = sc.grids[static_cast<std::size_t>(c.grid)];
  BenchRow row;
  row.grid = c.grid;
  row.m = c.m;
  row.n = c.n;
  row.r = c.r;
  row.epsilon = c.epsilon;
  const Instance inst = make_instance(g, c.m, c.n, sc.seed);
  if (g.timing) {
    row.dense_step_ns =
        time_bcd_step_ns(inst, GradientPath::dense, c.r, sc.steps, sc.repetitions, sc.seed);
    if (inst.cost().is_factored())
      row.factored_step_ns = time_bcd_step_ns(inst, GradientPath::factored, c.r, sc.steps,
                                              sc.repetitions, sc.seed);
  }
  if (g.solve) {
    AlmConfig cfg = alm_config_from_json(g.alm);
    cfg.r = c.r;
    cfg.epsilon = c.epsilon;
    cfg.seed = sc.seed;
    SolveReport rep;
    try {
      rep = ialm(inst, cfg);
    } catch (const NotConverged& e) {
      rep = e.report();
    }
    row.bcd_iters = rep.bcd_iters;
    row.converged = rep.converged;
    if (c.m * c.n <= 10000) {
      const double ot = solve_exact(inst).value;
      const TransportPlan rounded =
          round_to_feasible(rep.variables.plan().cwiseMax(0.0), inst.p(), inst.q());
      row.gap = transport_cost(inst.cost(), rounded) - ot;
    }
  }
  row.seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return row;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string opt_csv(const std::optional<double>& v) {
  return v ? io::format_real(*v) : std::string();
}

}  // namespace

double time_bcd_step_ns(const Instance& inst, GradientPath path, Index r, Index steps,
                        Index reps, std::uint64_t seed) {
  const Index m = inst.m(), n = inst.n();
  const double beta = 1.0;
  const LsotVariables x0 = default_initial_point(inst.p(), inst.q(), r);
  const Multipliers y = Multipliers::zeros(m, n);
  const double L_t = smoothness_constant(y, beta, inst.cost(), inst.p(), inst.q(), r).L;
  const double lambda = default_lambda(inst, x0, beta, r);
  detail::Engine engine(inst, path, Mode::lsot);

  std::vector<double> samples;
  double sink = 0.0;
  for (Index rep = 0; rep <= reps; ++rep) {
    LsotVariables x = x0;
    const auto start = Clock::now();
    for (Index tau = 0; tau < steps; ++tau) {
      const detail::Evaluation ev = engine.evaluate(x, y, beta, x0, L_t, lambda);
      sink += engine.stationarity(x, ev, x0, L_t, lambda);
      const Block block = static_cast<Block>(sample_block(seed, 0, 0, tau, 3));
      engine.step(block, x, ev, x0, L_t, 3.0 * L_t, lambda);
    }
    const double ns = std::chrono::duration<double, std::nano>(Clock::now() - start).count();
    if (rep > 0) samples.push_back(ns / static_cast<double>(steps));
  }
  if (!std::isfinite(sink)) throw Error(ErrorCode::non_finite, "bench: non-finite residual");
  std::sort(samples.begin(), samples.end());
  const std::size_t k = samples.size();
  return k % 2 ? samples[k / 2] : 0.5 * (samples[k / 2 - 1] + samples[k / 2]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorCode::invalid_params, "loglog_slope: need two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error(ErrorCode::invalid_params, "loglog_slope: x values coincide");
  return sxy / sxx;
}

AlmConfig alm_config_from_json(const json& doc, AlmConfig base) {
  reject_unknown(doc,
                 {"epsilon", "beta0", "sigma", "w0", "T_max", "S_max", "bcd_max_iter", "lambda",
                  "r", "seed", "mode", "gradient_path", "dual_update"},
                 "alm config");
  try {
    if (doc.contains("epsilon")) base.epsilon = doc["epsilon"].get<double>();
    if (doc.contains("beta0")) base.beta0 = doc["beta0"].get<double>();
    if (doc.contains("sigma")) base.sigma = doc["sigma"].get<double>();
    if (doc.contains("w0")) base.w0 = doc["w0"].get<double>();
    if (doc.contains("T_max")) base.T_max = doc["T_max"].get<Index>();
    if (doc.contains("S_max")) base.S_max = doc["S_max"].get<Index>();
    if (doc.contains("bcd_max_iter")) base.bcd_max_iter = doc["bcd_max_iter"].get<Index>();
    if (doc.contains("lambda")) base.lambda = doc["lambda"].get<double>();
    if (doc.contains("r")) base.r = doc["r"].get<Index>();
    if (doc.contains("seed")) base.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("mode")) {
      const std::string v = doc["mode"].get<std::string>();
      if (v != "lsot" && v != "lot") bad("alm config: mode must be lsot or lot");
      base.mode = v == "lot" ? Mode::lot : Mode::lsot;
    }
    if (doc.contains("gradient_path")) {
      const std::string v = doc["gradient_path"].get<std::string>();
      if (v != "dense" && v != "factored") bad("alm config: gradient_path must be dense or factored");
      base.gradient_path = v == "factored" ? GradientPath::factored : GradientPath::dense;
    }
    if (doc.contains("dual_update")) {
      const std::string v = doc["dual_update"].get<std::string>();
      if (v != "previous_iterate" && v != "new_iterate")
        bad("alm config: dual_update must be previous_iterate or new_iterate");
      base.dual_update =
          v == "new_iterate" ? DualUpdate::new_iterate : DualUpdate::previous_iterate;
    }
  } catch (const json::exception& e) {
    bad(std::string("alm config: ") + e.what());
  }
  return base;
}

BenchScenario BenchScenario::from_json(const json& doc) {
  reject_unknown(doc, {"name", "seed", "repetitions", "steps", "grids"}, "scenario");
  BenchScenario sc;
  try {
    sc.name = doc.value("name", std::string("bench"));
    sc.seed = doc.value("seed", std::uint64_t{0});
    sc.repetitions = doc.value("repetitions", Index{5});
    sc.steps = doc.value("steps", Index{50});
  } catch (const json::exception& e) {
    bad(std::string("scenario: ") + e.what());
  }
  if (sc.repetitions < 5) bad("scenario: repetitions must be at least 5");
  if (sc.steps < 1) bad("scenario: steps must be positive");
  if (!doc.contains("grids") || !doc["grids"].is_array() || doc["grids"].empty())
    bad("scenario: 'grids' must be a nonempty array");
  for (const json& gj : doc["grids"]) {
    reject_unknown(gj, {"m", "n", "r", "epsilon", "instance", "d", "timing", "solve", "alm"},
                   "grid");
    BenchGrid g;
    if (!gj.contains("n") || !gj.contains("r")) bad("grid: 'n' and 'r' are required");
    if (gj.contains("m")) g.m = list_of<Index>(gj["m"], "m");
    g.n = list_of<Index>(gj["n"], "n");
    g.r = list_of<Index>(gj["r"], "r");
    g.epsilon = gj.contains("epsilon") ? list_of<double>(gj["epsilon"], "epsilon")
                                       : std::vector<double>{1e-2};
    try {
      g.instance = gj.value("instance", std::string("points"));
      g.d = gj.value("d", Index{2});
      g.timing = gj.value("timing", true);
      g.solve = gj.value("solve", false);
    } catch (const json::exception& e) {
      bad(std::string("grid: ") + e.what());
    }
    if (g.instance != "points" && g.instance != "permutation" && g.instance != "random")
      bad("grid: instance must be points, permutation or random");
    if (gj.contains("alm")) {
      g.alm = gj["alm"];
      alm_config_from_json(g.alm);
    }
    for (Index v : g.n)
      if (v < 1) bad("grid: sizes must be positive");
    for (Index v : g.m)
      if (v < 1) bad("grid: sizes must be positive");
    for (double e : g.epsilon)
      if (!(e > 0.0)) bad("grid: epsilon must be positive");
    sc.grids.push_back(std::move(g));
  }
  return sc;
}

int bench_threads_from_env() {
  const char* v = std::getenv("LSOT_THREADS");
  if (!v) return 1;
  char* end = nullptr;
  const long k = std::strtol(v, &end, 10);
  return (end != v && *end == '\0' && k >= 1) ? static_cast<int>(k) : 1;
}

BenchResult run_bench(const BenchScenario& scenario, int threads) {
  const auto started = Clock::now();
  std::vector<Cell> cells;
  for (std::size_t gi = 0; gi < scenario.grids.size(); ++gi) {
    const BenchGrid& g = scenario.grids[gi];
    for (Index r : g.r)
      for (double eps : g.epsilon)
        for (Index n : g.n) {
          if (g.m.empty()) {
            cells.push_back({static_cast<Index>(gi), n, n, r, eps});
          } else {
            for (Index m : g.m) cells.push_back({static_cast<Index>(gi), m, n, r, eps});
          }
        }
  }

  BenchResult result;
  result.name = scenario.name;
  result.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < cells.size();) {
      try {
        result.rows[k] = run_cell(scenario, cells[k]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  // Slopes over n for each (grid, m-list-free, r, epsilon) group with at least two sizes.
  std::map<std::tuple<Index, Index, double>, std::vector<const BenchRow*>> groups;
  for (const BenchRow& row : result.rows)
    if (scenario.grids[static_cast<std::size_t>(row.grid)].m.empty())
      groups[{row.grid, row.r, row.epsilon}].push_back(&row);
  for (const auto& [key, rows] : groups) {
    if (rows.size() < 2) continue;
    for (const char* path : {"dense", "factored"}) {
      std::vector<double> xs, ys;
      std::vector<Index> ns;
      for (const BenchRow* row : rows) {
        const auto& t = std::string(path) == "dense" ? row->dense_step_ns : row->factored_step_ns;
        if (!t) continue;
        xs.push_back(static_cast<double>(row->n));
        ys.push_back(*t);
        ns.push_back(row->n);
      }
      if (xs.size() < 2) continue;
      result.fits.push_back(SlopeFit{std::get<0>(key), std::get<1>(key), std::get<2>(key), path,
                                     ns, loglog_slope(xs, ys)});
    }
  }
  result.seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return result;
}

json bench_to_json(const BenchResult& result) {
  json rows = json::array();
  for (const BenchRow& row : result.rows) {
    rows.push_back({{"grid", row.grid},
                    {"m", row.m},
                    {"n", row.n},
                    {"r", row.r},
                    {"epsilon", row.epsilon},
                    {"dense_step_ns", opt_json(row.dense_step_ns)},
                    {"factored_step_ns", opt_json(row.factored_step_ns)},
                    {"bcd_iters", row.bcd_iters ? json(*row.bcd_iters) : json(nullptr)},
                    {"converged", row.converged ? json(*row.converged) : json(nullptr)},
                    {"gap", opt_json(row.gap)},
                    {"seconds", row.seconds}});
  }
  json fits = json::array();
  for (const SlopeFit& f : result.fits)
    fits.push_back({{"grid", f.grid},
                    {"r", f.r},
                    {"epsilon", f.epsilon},
                    {"path", f.path},
                    {"n", f.n},
                    {"slope", f.slope}});
  return {{"name", result.name}, {"rows", rows}, {"fits", fits}, {"seconds", result.seconds}};
}

void write_bench_csv(std::ostream& os, const BenchResult& result) {
  os << "grid,m,n,r,epsilon,dense_step_ns,factored_step_ns,bcd_iters,converged,gap,seconds\n";
  for (const BenchRow& row : result.rows) {
    os << row.grid << ',' << row.m << ',' << row.n << ',' << row.r << ','
       << io::format_real(row.epsilon) << ',' << opt_csv(row.dense_step_ns) << ','
       << opt_csv(row.factored_step_ns) << ','
       << (row.bcd_iters ? std::to_string(*row.bcd_iters) : std::string()) << ','
       << (row.converged ? (*row.converged ? "true" : "false") : "") << ','
       << opt_csv(row.gap) << ',' << io::format_real(row.seconds) << '\n';
  }
}

}  // namespace lsot
