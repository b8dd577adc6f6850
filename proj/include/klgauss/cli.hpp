#pragma once

#include <iosfwd>

namespace klgauss {

/// Exit codes of the command-line driver.
enum ExitCode : int {
  exit_ok = 0,
  exit_invalid = 1,
  exit_degenerate = 2,
  exit_not_converged = 3,
  exit_aborted = 4,
};

/// Subcommands: modes, approx, sweep, bvm. Results go to `out` (or the file
/// given by --out), diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace klgauss
