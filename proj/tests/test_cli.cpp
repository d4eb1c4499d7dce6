#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lsot/commands.hpp"
#include "lsot/io.hpp"

using namespace lsot;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lsot");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("lsot_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen permutation writes uniform marginals") {
  TempDir dir;
  const Run r = cli({"--seed", "1", "--out", dir / "p.json", "gen", "permutation", "--n", "4"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("m=4") != std::string::npos);
  const Instance inst = io::load_instance(dir / "p.json");
  CHECK(inst.p() == Vector::Constant(4, 0.25));
  CHECK(inst.q() == Vector::Constant(4, 0.25));
}

TEST_CASE("gen planted keeps the sparse count") {
  TempDir dir;
  const Run r = cli({"gen", "planted", "--m", "6", "--n", "6", "--r", "2", "--rho", "4", "--seed",
                     "2", "--out", dir / "pl.json"});
  REQUIRE(r.code == 0);
  const Instance inst = io::load_instance(dir / "pl.json");
  REQUIRE(inst.decomposition());
  CHECK((inst.decomposition()->S.array() != 0.0).count() == 4);
  const Run bad = cli({"gen", "planted", "--m", "2", "--n", "2", "--r", "1", "--rho", "5"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("InfeasibleSparsity") != std::string::npos);
}

TEST_CASE("gen points uses a factored cost of inner dimension d + 2") {
  const Run r = cli({"gen", "points", "--m", "8", "--n", "8", "--d", "2", "--seed", "3"});
  REQUIRE(r.code == 0);
  const Instance inst = io::instance_from_json(nlohmann::json::parse(r.out));
  CHECK(inst.cost().is_factored());
  CHECK(inst.cost().inner_dim() == 4);
}

TEST_CASE("solve exact on the 2x2 fixture") {
  TempDir dir;
  std::ofstream(dir / "fx.json")
      << R"({"name": "fixture", "p": [0.3, 0.7], "q": [0.5, 0.5], "cost": {"dense": [[0, 1], [1, 0]]}})";
  const Run r = cli({"solve", "exact", dir / "fx.json"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(std::abs(doc["value"].get<double>() - 0.2) <= 1e-12);
  CHECK(doc["support_size"] == 3);

  const Run csv = cli({"--format", "csv", "solve", "exact", dir / "fx.json"});
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("key,value\n", 0) == 0);
}

TEST_CASE("solve sinkhorn writes a trace") {
  TempDir dir;
  REQUIRE(cli({"--out", dir / "r.json", "gen", "points", "--m", "5", "--n", "6", "--d", "2"}).code ==
          0);
  const Run r = cli({"--trace", dir / "t.csv", "solve", "sinkhorn", dir / "r.json", "--eta", "0.5"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["converged"] == true);
  const std::string trace = read_file(dir / "t.csv");
  CHECK(trace.rfind("iteration,marginal_error,value\n", 0) == 0);
  const Run capped = cli({"solve", "sinkhorn", dir / "r.json", "--eta", "0.01", "--max-iter", "2",
                          "--tol", "1e-15"});
  CHECK(capped.code == 2);
}

TEST_CASE("solve lsot certifies the 10x10 permutation instance") {
  TempDir dir;
  REQUIRE(cli({"--seed", "0", "--out", dir / "perm.json", "gen", "permutation", "--n", "10"}).code ==
          0);
  const Run r = cli({"--trace", dir / "trace.csv", "solve", "lsot", dir / "perm.json", "--rank",
                     "2", "--epsilon", "1e-2", "--beta0", "4", "--S-max", "1000000", "--T-max",
                     "10"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["kkt_stationarity"].get<double>() <= 1e-2);
  CHECK(doc["feasibility"].get<double>() <= 1e-2);
  const std::string trace = read_file(dir / "trace.csv");
  CHECK(trace.rfind("t,s_total,beta,L_t,feasibility,stationarity,objective,w_t,nnz_S,wall_ns\n",
                    0) == 0);
}

TEST_CASE("solve lot is deterministic and keeps S empty") {
  TempDir dir;
  REQUIRE(cli({"--out", dir / "i.json", "gen", "points", "--m", "5", "--n", "5", "--d", "2"}).code ==
          0);
  const std::vector<std::string> args{"--seed", "4", "solve", "lot", dir / "i.json", "--T-max",
                                      "2", "--S-max", "5", "--bcd-max-iter", "500"};
  const Run a = cli(args), b = cli(args);
  CHECK(a.code == b.code);
  CHECK((a.code == 0 || a.code == 2));
  const auto da = nlohmann::json::parse(a.out), db = nlohmann::json::parse(b.out);
  CHECK(da["objective"] == db["objective"]);
  CHECK(da["S"]["entries"].empty());
}

TEST_CASE("solve exit codes") {
  CHECK(cli({"solve", "exact", "/nonexistent/file.json"}).code == 1);
  CHECK(cli({"solve", "bogus", "x.json"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  TempDir dir;
  REQUIRE(cli({"--out", dir / "p.json", "gen", "permutation", "--n", "6"}).code == 0);
  const Run nc = cli({"solve", "lsot", dir / "p.json", "--T-max", "1", "--S-max", "1",
                      "--bcd-max-iter", "3", "--epsilon", "1e-8"});
  CHECK(nc.code == 2);
  CHECK(nlohmann::json::parse(nc.out)["converged"] == false);
}

TEST_CASE("bound reports zero at full budgets and sweeps monotonically") {
  TempDir dir;
  REQUIRE(cli({"--out", dir / "pl.json", "gen", "planted", "--m", "5", "--n", "5", "--r", "2",
               "--rho", "3", "--seed", "4"})
              .code == 0);
  const Run full = cli({"bound", dir / "pl.json", "--r", "2", "--rho", "3"});
  REQUIRE(full.code == 0);
  CHECK(nlohmann::json::parse(full.out)["rhs"].get<double>() == 0.0);

  const Run sweep = cli({"--format", "csv", "bound", dir / "pl.json", "--sweep"});
  REQUIRE(sweep.code == 0);
  std::istringstream lines(sweep.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "r,rho,rhs,measured_gap");
  std::map<long, std::vector<double>> by_rho;
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string r, rho, rhs;
    std::getline(cells, r, ',');
    std::getline(cells, rho, ',');
    std::getline(cells, rhs, ',');
    if (rhs.empty()) {
      CHECK(r == "0");
      CHECK(rho == "0");
      continue;
    }
    by_rho[std::stol(rho)].push_back(std::stod(rhs));
  }
  CHECK(by_rho.size() == 4);
  for (const auto& [rho, column] : by_rho)
    for (std::size_t k = 1; k < column.size(); ++k) CHECK(column[k] <= column[k - 1]);

  REQUIRE(cli({"--out", dir / "perm.json", "gen", "permutation", "--n", "3"}).code == 0);
  const Run none = cli({"bound", dir / "perm.json"});
  CHECK(none.code == 1);
  CHECK(none.err.find("NoCertificate") != std::string::npos);
}

TEST_CASE("verify runs named suites") {
  const Run r = cli({"--seed", "0", "verify", "oracle"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["passed"] == true);
  CHECK(doc["suites"][0]["metrics"]["agreements"] == 50);
  const Run g = cli({"verify", "gradients"});
  CHECK(g.code == 0);
  CHECK(nlohmann::json::parse(g.out)["suites"][0]["metrics"]["max_rel_err"].get<double>() <= 1e-5);
  CHECK(cli({"verify", "projection"}).code == 0);
  const Run bad = cli({"verify", "nope"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("UnknownSuite") != std::string::npos);
}

TEST_CASE("bench runs a small scenario") {
  TempDir dir;
  std::ofstream(dir / "s.json") << R"({
    "name": "tiny", "repetitions": 5, "steps": 5,
    "grids": [
      {"n": [8, 16], "r": [2], "instance": "points"},
      {"n": [6], "r": [2], "epsilon": [0.1, 0.05], "timing": false, "solve": true,
       "instance": "permutation", "alm": {"T_max": 2, "S_max": 5, "bcd_max_iter": 200}}
    ]})";
  const Run r = cli({"bench", dir / "s.json"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "grid,m,n,r,epsilon,dense_step_ns,factored_step_ns,bcd_iters,converged,gap,seconds");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 4);
  CHECK(r.err.find("path=factored") != std::string::npos);

  const Run j = cli({"--format", "json", "bench", dir / "s.json"});
  REQUIRE(j.code == 0);
  const auto doc = nlohmann::json::parse(j.out);
  CHECK(doc["fits"].size() == 2);
  CHECK(doc["rows"][2]["gap"].is_number());

  std::ofstream(dir / "bad.json") << R"({"grids": [{"n": [4], "r": [1], "colour": 1}]})";
  CHECK(cli({"bench", dir / "bad.json"}).code == 1);
}
