#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace amber::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kIo = 3 };

/// Runs the command line `args` (program name excluded) and returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amber::cli
