#pragma once

#include <iosfwd>

namespace lsot {

/// Exit codes of the command-line front end.
enum ExitCode : int { exit_ok = 0, exit_error = 1, exit_not_converged = 2 };

/// Entry point of the `lsot` executable. Reports go to `out` unless --out is
/// given; diagnostics and summary lines go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lsot
