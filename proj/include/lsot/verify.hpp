#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsot/bounds.hpp"
#include "lsot/lsot.hpp"

namespace lsot {

/// Outcome of one property suite.
struct SuiteResult {
  std::string name;
  bool passed = true;
  Index cases = 0;
  Index failures = 0;
  nlohmann::json metrics = nlohmann::json::object();
};

SuiteResult verify_gradients(std::uint64_t seed, Index cases = 100);
SuiteResult verify_convexity(std::uint64_t seed, Index pairs = 200);
SuiteResult verify_projection(std::uint64_t seed, Index cases = 50);
SuiteResult verify_oracle(std::uint64_t seed, Index cases = 50);
SuiteResult verify_bounds(std::uint64_t seed);
/// lhs <= rhs (1 + 1e-8) over truncations of planted decompositions.
SuiteResult verify_psi_lemma(std::uint64_t seed, Index cases = 100);

/// Names accepted by run_suites: gradients, convexity, projection, oracle,
/// bounds, all.
std::vector<SuiteResult> run_suites(const std::string& suite, std::uint64_t seed);
nlohmann::json suites_to_json(const std::vector<SuiteResult>& results);

/// Random state strictly inside the box with a dense S.
LsotVariables random_interior_point(Index m, Index n, Index r, std::uint64_t seed);

/// Feasible LSOT state whose plan is the KL projection of Z = W H^T + S,
/// written as (D1 W, D2 H, D1 S D2). Empty when the support is infeasible.
std::optional<LsotVariables> projected_state(const Matrix& W, const Matrix& H, const Matrix& S,
                                             const Vector& p, const Vector& q, Index r);

struct GapMeasurement {
  double ot = 0.0;
  double rounded_cost = 0.0;
  double gap = 0.0;  // rounded_cost - ot
  bool warm_started = false;
  bool converged = false;
  Index bcd_iters = 0;
};

/// LSOT(r, rho) on a planted instance: ialm from the projected truncation of
/// the certificate, S cut to its rho largest entries, then rounding.
GapMeasurement measure_gap(const Instance& inst, const Decomposition& dec, Index r, Index rho,
                           const AlmConfig& config, bool warm_start = true);

}  // namespace lsot
