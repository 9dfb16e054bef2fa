#pragma once

#include <iosfwd>

namespace cfarnet::app {

enum ExitCode : int { kSuccess = 0, kValidationError = 1, kRuntimeError = 2 };

/// Entry point of the `cfarnet` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cfarnet::app
