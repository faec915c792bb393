#pragma once

namespace sympcool::cli {

enum ExitCode : int { Success = 0, ConfigFailure = 2, NumericalFailure = 3, Interrupted = 130 };

/// Entry point of the `sympcool` command; returns the process exit code.
int run(int argc, char** argv);

}  // namespace sympcool::cli
