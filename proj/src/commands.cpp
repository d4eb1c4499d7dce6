#include "lsot/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "lsot/bench.hpp"
#include "lsot/bounds.hpp"
#include "lsot/entropic.hpp"
#include "lsot/exact.hpp"
#include "lsot/io.hpp"
#include "lsot/verify.hpp"

namespace lsot {

namespace {

using json = nlohmann::json;

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string out;
  std::string trace;
  std::string format;  // empty: the command's default
};

struct AlmFlags {
  std::string config_file;
  std::optional<Index> rank;
  std::optional<double> epsilon, beta0, sigma, w0, lambda;
  std::optional<Index> T_max, S_max, bcd_max_iter;
  std::string path, dual_update;
};

void add_alm_flags(CLI::App* cmd, AlmFlags& f) {
  cmd->add_option("--config", f.config_file, "JSON file with solver parameters");
  cmd->add_option("--rank", f.rank, "Rank r of the low-rank factor");
  cmd->add_option("--epsilon", f.epsilon, "KKT tolerance");
  cmd->add_option("--beta0", f.beta0, "Initial penalty");
  cmd->add_option("--sigma", f.sigma, "Penalty growth factor");
  cmd->add_option("--w0", f.w0, "Initial dual step");
  cmd->add_option("--lambda", f.lambda, "l1 weight on S");
  cmd->add_option("--T-max", f.T_max, "Outer iteration cap");
  cmd->add_option("--S-max", f.S_max, "Proximal-point iterations per outer step");
  cmd->add_option("--bcd-max-iter", f.bcd_max_iter, "Block updates per BCD call");
  cmd->add_option("--path", f.path, "Gradient path")->check(CLI::IsMember({"dense", "factored"}));
  cmd->add_option("--dual-update", f.dual_update, "Iterate used by the multiplier step")
      ->check(CLI::IsMember({"previous_iterate", "new_iterate"}));
}

AlmConfig build_config(const AlmFlags& f, std::uint64_t seed) {
  AlmConfig cfg;
  cfg.seed = seed;
  if (!f.config_file.empty()) cfg = alm_config_from_json(io::read_json_file(f.config_file), cfg);
  if (f.rank) cfg.r = *f.rank;
  if (f.epsilon) cfg.epsilon = *f.epsilon;
  if (f.beta0) cfg.beta0 = *f.beta0;
  if (f.sigma) cfg.sigma = *f.sigma;
  if (f.w0) cfg.w0 = *f.w0;
  if (f.lambda) cfg.lambda = *f.lambda;
  if (f.T_max) cfg.T_max = *f.T_max;
  if (f.S_max) cfg.S_max = *f.S_max;
  if (f.bcd_max_iter) cfg.bcd_max_iter = *f.bcd_max_iter;
  if (!f.path.empty())
    cfg.gradient_path = f.path == "factored" ? GradientPath::factored : GradientPath::dense;
  if (!f.dual_update.empty())
    cfg.dual_update =
        f.dual_update == "new_iterate" ? DualUpdate::new_iterate : DualUpdate::previous_iterate;
  return cfg;
}

/// Writes to --out when set, otherwise to the command's stream.
void emit(const GlobalOptions& g, std::ostream& out, const std::function<void(std::ostream&)>& w) {
  if (g.out.empty()) {
    w(out);
    return;
  }
  std::ofstream f(g.out);
  if (!f) throw Error(ErrorCode::io_error, "cannot write '" + g.out + "'");
  w(f);
  if (!f) throw Error(ErrorCode::io_error, "write failed for '" + g.out + "'");
}

std::ofstream open_trace(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot write trace '" + path + "'");
  return f;
}

/// Flat key,value CSV for the scalar members of a JSON object.
void write_scalar_csv(std::ostream& os, const json& doc) {
  os << "key,value\n";
  for (const auto& [key, value] : doc.items()) {
    if (value.is_structured()) continue;
    os << key << ',';
    if (value.is_number_float())
      os << io::format_real(value.get<double>());
    else if (value.is_string())
      os << value.get<std::string>();
    else
      os << value.dump();
    os << '\n';
  }
}

void emit_report(const GlobalOptions& g, std::ostream& out, const json& doc) {
  emit(g, out, [&](std::ostream& os) {
    if (g.format == "csv")
      write_scalar_csv(os, doc);
    else
      io::write_json(os, doc);
  });
}

json sparse_to_json(const SparseBlock& S) {
  json entries = json::array();
  for (const SparseEntry& e : S.entries()) entries.push_back({e.row, e.col, e.value});
  return {{"rows", S.rows()}, {"cols", S.cols()}, {"entries", entries}};
}

json solve_report_json(const SolveReport& rep, const std::string& method) {
  return {{"method", method},
          {"converged", rep.converged},
          {"objective", rep.objective},
          {"feasibility", rep.feasibility},
          {"kkt_stationarity", rep.kkt_stationarity},
          {"beta", rep.beta},
          {"lambda", rep.lambda},
          {"outer_iters", rep.outer_iters},
          {"bcd_iters", rep.bcd_iters},
          {"A", io::matrix_to_json(rep.variables.A)},
          {"B", io::matrix_to_json(rep.variables.B)},
          {"S", sparse_to_json(rep.variables.S)},
          {"y_p", io::vector_to_json(rep.multipliers.y_p)},
          {"y_q", io::vector_to_json(rep.multipliers.y_q)}};
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "t,s_total,beta,L_t,feasibility,stationarity,objective,w_t,nnz_S,wall_ns\n";
  for (const TraceRow& r : rows)
    os << r.t << ',' << r.s_total << ',' << io::format_real(r.beta) << ','
       << io::format_real(r.L_t) << ',' << io::format_real(r.feasibility) << ','
       << io::format_real(r.stationarity) << ',' << io::format_real(r.objective) << ','
       << io::format_real(r.w_t) << ',' << r.nnz_S << ',' << r.wall_ns << '\n';
}

json bound_json(const BoundReport& b) {
  return {{"U", b.U},
          {"delta", b.delta},
          {"rhs", b.rhs},
          {"r", b.r},
          {"rho", b.rho},
          {"r_star", b.r_star},
          {"rho_star", b.rho_star},
          {"variant", b.variant == BoundVariant::theorem1 ? "theorem1" : "corollary2"},
          {"vacuous", b.vacuous}};
}

Decomposition certificate(const Instance& inst) {
  if (!inst.decomposition())
    throw Error(ErrorCode::no_certificate, "instance carries no planted decomposition");
  return Decomposition::from_planted(*inst.decomposition());
}

void check_format(const GlobalOptions& g) {
  if (!g.format.empty() && g.format != "json" && g.format != "csv")
    throw Error(ErrorCode::invalid_params, "--format must be json or csv");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank plus sparse optimal transport toolkit", "lsot"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output file (default: standard output)");
  app.add_option("--trace", g.trace, "Per-iteration trace CSV");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));

  // gen
  CLI::App* gen = app.add_subcommand("gen", "Generate an instance");
  gen->require_subcommand(1);
  int gen_m = 0, gen_n = 0, gen_r = 0, gen_rho = 0, gen_d = 0;
  CLI::App* gen_perm = gen->add_subcommand("permutation", "Uniform marginals, 0/1 cost");
  gen_perm->add_option("--n", gen_n, "Size")->required();
  CLI::App* gen_planted = gen->add_subcommand("planted", "Plan with a planted W H^T + S split");
  gen_planted->add_option("--m", gen_m)->required();
  gen_planted->add_option("--n", gen_n)->required();
  gen_planted->add_option("--r", gen_r, "Planted nonnegative rank")->required();
  gen_planted->add_option("--rho", gen_rho, "Planted sparse nonzeros")->required();
  CLI::App* gen_points = gen->add_subcommand("points", "Point clouds, squared Euclidean cost");
  gen_points->add_option("--m", gen_m)->required();
  gen_points->add_option("--n", gen_n)->required();
  gen_points->add_option("--d", gen_d, "Dimension")->required();

  // solve
  CLI::App* solve = app.add_subcommand("solve", "Solve an instance");
  std::string method, instance_path;
  solve->add_option("method", method, "exact | sinkhorn | lsot | lot")
      ->required()
      ->check(CLI::IsMember({"exact", "sinkhorn", "lsot", "lot"}));
  solve->add_option("instance", instance_path, "Instance JSON")->required();
  AlmFlags alm;
  add_alm_flags(solve, alm);
  std::optional<Index> solve_rho;
  solve->add_option("--rho", solve_rho, "Keep only the rho largest entries of S afterwards");
  std::optional<double> eta;
  double sk_tol = 1e-9;
  Index sk_max_iter = 100000;
  solve->add_option("--eta", eta, "Entropic weight (default from epsilon)");
  solve->add_option("--tol", sk_tol, "Sinkhorn marginal tolerance");
  solve->add_option("--max-iter", sk_max_iter, "Sinkhorn sweep cap");

  // bound
  CLI::App* bound = app.add_subcommand("bound", "Evaluate the truncation bound");
  std::string bound_path, variant = "theorem1";
  Index bound_r = 0, bound_rho = 0;
  bool sweep = false, bound_solve = false;
  bound->add_option("instance", bound_path, "Instance JSON with a decomposition")->required();
  bound->add_option("--r", bound_r, "Rank budget");
  bound->add_option("--rho", bound_rho, "Sparsity budget");
  bound->add_option("--variant", variant)->check(CLI::IsMember({"theorem1", "corollary2"}));
  bound->add_flag("--sweep", sweep, "Every (r, rho) with r <= r*, rho <= rho*");
  bound->add_flag("--solve", bound_solve, "Also measure the LSOT gap");
  AlmFlags bound_alm;
  add_alm_flags(bound, bound_alm);

  // verify
  CLI::App* verify = app.add_subcommand("verify", "Run property suites");
  std::string suite;
  verify->add_option("suite", suite, "gradients | convexity | projection | oracle | bounds | all")
      ->required();

  // bench
  CLI::App* bench = app.add_subcommand("bench", "Timing and iteration sweeps");
  std::string scenario_path;
  bench->add_option("scenario", scenario_path, "Scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_error;
  }

  try {
    check_format(g);

    if (gen->parsed()) {
      if (g.format == "csv") throw Error(ErrorCode::invalid_params, "gen writes JSON only");
      std::optional<Instance> inst;
      if (gen_perm->parsed()) {
        if (gen_n < 1) throw Error(ErrorCode::invalid_params, "--n must be positive");
        inst = gen_permutation_instance(gen_n, g.seed);
      } else if (gen_planted->parsed()) {
        if (gen_m < 1 || gen_n < 1 || gen_r < 0 || gen_rho < 0)
          throw Error(ErrorCode::invalid_params, "sizes must be positive, budgets nonnegative");
        inst = gen_planted_instance(gen_m, gen_n, gen_r, gen_rho, g.seed).instance;
      } else {
        if (gen_m < 1 || gen_n < 1 || gen_d < 1)
          throw Error(ErrorCode::invalid_params, "--m, --n and --d must be positive");
        inst = gen_points_instance(gen_m, gen_n, gen_d, g.seed);
      }
      emit(g, out, [&](std::ostream& os) { io::write_json(os, io::instance_to_json(*inst)); });
      std::ostream& summary = g.out.empty() ? err : out;
      summary << "generated " << inst->info().name << ": m=" << inst->m() << " n=" << inst->n()
              << " cost=" << (inst->cost().is_factored() ? "factored" : "dense");
      if (inst->cost().is_factored()) summary << " inner_dim=" << inst->cost().E().cols();
      if (inst->decomposition())
        summary << " nnz_S=" << (inst->decomposition()->S.array() != 0.0).count();
      summary << '\n';
      return exit_ok;
    }

    if (solve->parsed()) {
      const Instance inst = io::load_instance(instance_path);
      if (method == "exact") {
        const ExactSolution sol = solve_exact(inst);
        emit_report(g, out,
                    {{"method", "exact"},
                     {"value", sol.value},
                     {"support_size", sol.support_size},
                     {"iterations", sol.iterations},
                     {"plan", io::matrix_to_json(sol.plan.entries())}});
        return exit_ok;
      }
      if (method == "sinkhorn") {
        const AlmConfig cfg = build_config(alm, g.seed);
        const double e = eta ? *eta : default_eta(cfg.epsilon * inst.cost().max_abs(), inst.m(), inst.n());
        std::ofstream trace;
        SinkhornTrace hook;
        if (!g.trace.empty()) {
          trace = open_trace(g.trace);
          trace << "iteration,marginal_error,value\n";
          hook = [&](Index it, double merr, double value) {
            trace << it << ',' << io::format_real(merr) << ',' << io::format_real(value) << '\n';
          };
        }
        auto report = [&](const SinkhornResult& r, bool converged) {
          const TransportPlan rounded = round_to_feasible(r.plan.entries(), inst.p(), inst.q());
          return json{{"method", "sinkhorn"},
                      {"converged", converged},
                      {"value", r.value},
                      {"rounded_value", transport_cost(inst.cost(), rounded)},
                      {"eta", r.eta},
                      {"iterations", r.iterations},
                      {"marginal_error", r.marginal_error},
                      {"plan", io::matrix_to_json(r.plan.entries())}};
        };
        try {
          const SinkhornResult r = sinkhorn_solve(inst, e, sk_tol, sk_max_iter, hook);
          emit_report(g, out, report(r, true));
          return exit_ok;
        } catch (const SinkhornNonConvergence& nc) {
          emit_report(g, out, report(nc.best(), false));
          err << "lsot: " << nc.what() << '\n';
          return exit_not_converged;
        }
      }
      AlmConfig cfg = build_config(alm, g.seed);
      cfg.mode = method == "lot" ? Mode::lot : Mode::lsot;
      SolveReport rep;
      int code = exit_ok;
      try {
        rep = ialm(inst, cfg);
      } catch (const NotConverged& nc) {
        rep = nc.report();
        err << "lsot: " << nc.what() << '\n';
        code = exit_not_converged;
      }
      json doc = solve_report_json(rep, method);
      if (solve_rho) {
        const Matrix T =
            rep.variables.A * rep.variables.B.transpose() +
            best_sparse_truncation(rep.variables.S.to_dense(), *solve_rho);
        doc["rho"] = *solve_rho;
        doc["truncated_objective"] = transport_cost(inst.cost(), T);
        doc["rounded_objective"] =
            transport_cost(inst.cost(), round_to_feasible(T, inst.p(), inst.q()));
      }
      if (!g.trace.empty()) {
        std::ofstream trace = open_trace(g.trace);
        write_trace_csv(trace, rep.trace);
      }
      emit_report(g, out, doc);
      return code;
    }

    if (bound->parsed()) {
      const Instance inst = io::load_instance(bound_path);
      const Decomposition dec = certificate(inst);
      const BoundVariant v =
          variant == "corollary2" ? BoundVariant::corollary2 : BoundVariant::theorem1;
      const AlmConfig cfg = build_config(bound_alm, g.seed);
      std::vector<std::pair<Index, Index>> cells;
      if (sweep) {
        for (Index r = 0; r <= dec.r_star(); ++r)
          for (Index rho = 0; rho <= dec.rho_star(); ++rho) cells.emplace_back(r, rho);
      } else {
        cells.emplace_back(bound_r, bound_rho);
      }
      json rows = json::array();
      for (const auto& [r, rho] : cells) {
        json row;
        try {
          row = bound_json(theorem_bound(dec, r, rho, inst.cost(), v));
        } catch (const Error& e) {
          // An all-zero truncation leaves delta undefined; a sweep reports the cell as empty.
          if (!sweep || e.code() != ErrorCode::all_zero) throw;
          row = {{"r", r}, {"rho", rho}, {"rhs", nullptr}, {"delta", nullptr}};
        }
        row["measured_gap"] = nullptr;
        if (bound_solve && r >= 1) {
          const GapMeasurement gm = measure_gap(inst, dec, r, rho, cfg);
          row["measured_gap"] = gm.gap;
          row["converged"] = gm.converged;
        }
        rows.push_back(row);
      }
      emit(g, out, [&](std::ostream& os) {
        if (g.format == "csv") {
          os << "r,rho,rhs,measured_gap\n";
          for (const json& row : rows)
            os << row["r"].get<Index>() << ',' << row["rho"].get<Index>() << ','
               << (row["rhs"].is_null() ? std::string()
                                        : io::format_real(row["rhs"].get<double>()))
               << ','
               << (row["measured_gap"].is_null()
                       ? std::string()
                       : io::format_real(row["measured_gap"].get<double>()))
               << '\n';
        } else {
          io::write_json(os, sweep ? json{{"rows", rows}} : rows[0]);
        }
      });
      return exit_ok;
    }

    if (verify->parsed()) {
      const std::vector<SuiteResult> results = run_suites(suite, g.seed);
      const json doc = suites_to_json(results);
      emit(g, out, [&](std::ostream& os) {
        if (g.format == "csv") {
          os << "name,passed,cases,failures\n";
          for (const SuiteResult& r : results)
            os << r.name << ',' << (r.passed ? "true" : "false") << ',' << r.cases << ','
               << r.failures << '\n';
        } else {
          io::write_json(os, doc);
        }
      });
      return doc["passed"].get<bool>() ? exit_ok : exit_error;
    }

    if (bench->parsed()) {
      const BenchScenario sc = BenchScenario::from_json(io::read_json_file(scenario_path));
      const BenchResult res = run_bench(sc, bench_threads_from_env());
      emit(g, out, [&](std::ostream& os) {
        if (g.format == "json")
          io::write_json(os, bench_to_json(res));
        else
          write_bench_csv(os, res);
      });
      for (const SlopeFit& f : res.fits)
        err << "slope grid=" << f.grid << " r=" << f.r << " path=" << f.path << ": "
            << io::format_real(f.slope) << '\n';
      return exit_ok;
    }
  } catch (const Error& e) {
    err << "lsot: error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_error;
  } catch (const std::exception& e) {
    err << "lsot: error: " << e.what() << '\n';
    return exit_error;
  }
  return exit_error;
}

}  // namespace lsot
