#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lsot {

enum class ErrorCode {
  negative_mass,
  not_normalized,
  dimension_mismatch,
  invalid_cost,
  infeasible_sparsity,
  size_guard_exceeded,
  non_convergence,
  numerical_underflow,
  infeasible_support,
  negative_input,
  iteration_cap_reached,
  not_converged,
  non_finite,
  all_zero,
  no_certificate,
  invalid_config,
  io_error,
  invalid_params,
  unknown_suite,
};

std::string_view to_string(ErrorCode code);

// Base of every error raised by the library. Solvers that give up early
// derive from this and attach their best iterate.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lsot
