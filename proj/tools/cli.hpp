#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace salign::cli {

enum ExitCode : int {
  kSuccess = 0,
  kVerificationFailed = 1,
  kNumericalAbort = 2,
  kUsageError = 3,
};

/// Runs the command line `args` (without the program name). Normal output goes
/// to `out`, diagnostics to `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace salign::cli
