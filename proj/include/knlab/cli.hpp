#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "knlab/config.hpp"

namespace knlab {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

/// Parses `args` (without the program name), runs the command and writes the
/// output to `out` (or the configured file). Diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Runs an already resolved configuration.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace knlab
