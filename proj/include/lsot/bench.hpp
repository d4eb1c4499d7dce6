#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsot/lsot.hpp"

namespace lsot {

/// Median wall time of one BCD step (evaluate, stationarity test, block
/// update) over `reps` timed runs of `steps` steps each, after one discarded
/// warm-up run. Every run starts from the default initial point.
double time_bcd_step_ns(const Instance& inst, GradientPath path, Index r, Index steps,
                        Index reps, std::uint64_t seed);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Overrides fields of `base` from a JSON object. Accepted keys: epsilon,
/// beta0, sigma, w0, T_max, S_max, bcd_max_iter, lambda, r, seed, mode
/// ("lsot" | "lot"), gradient_path ("dense" | "factored"), dual_update
/// ("previous_iterate" | "new_iterate"). Other keys raise InvalidParams.
AlmConfig alm_config_from_json(const nlohmann::json& doc, AlmConfig base = {});

struct BenchGrid {
  std::vector<Index> m;  // empty: square cells with m = n
  std::vector<Index> n;
  std::vector<Index> r;
  std::vector<double> epsilon;
  std::string instance = "points";  // points | permutation | random
  Index d = 2;
  bool timing = true;
  bool solve = false;
  nlohmann::json alm = nlohmann::json::object();
};

struct BenchScenario {
  std::string name;
  std::uint64_t seed = 0;
  Index repetitions = 5;
  Index steps = 50;
  std::vector<BenchGrid> grids;

  static BenchScenario from_json(const nlohmann::json& doc);
};

struct BenchRow {
  Index grid = 0;
  Index m = 0;
  Index n = 0;
  Index r = 0;
  double epsilon = 0.0;
  std::optional<double> dense_step_ns;
  std::optional<double> factored_step_ns;
  std::optional<Index> bcd_iters;
  std::optional<bool> converged;
  std::optional<double> gap;  // only when m * n <= 1e4
  double seconds = 0.0;
};

struct SlopeFit {
  Index grid = 0;
  Index r = 0;
  double epsilon = 0.0;
  std::string path;
  std::vector<Index> n;
  double slope = 0.0;
};

struct BenchResult {
  std::string name;
  std::vector<BenchRow> rows;
  std::vector<SlopeFit> fits;
  double seconds = 0.0;
};

/// Runs every cell; `threads` workers pick cells in order.
BenchResult run_bench(const BenchScenario& scenario, int threads = 1);

/// LSOT_THREADS, or 1 when unset or invalid.
int bench_threads_from_env();

nlohmann::json bench_to_json(const BenchResult& result);
/// One header line, then one line per cell; empty fields for missing values.
void write_bench_csv(std::ostream& os, const BenchResult& result);

}  // namespace lsot
