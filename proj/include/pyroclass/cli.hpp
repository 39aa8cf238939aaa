#pragma once

#include <string>
#include <vector>

namespace pyroclass::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadArguments = 2,
  kDataError = 3,
  kDiverged = 4,
};

/// Parses and runs one subcommand (split, train, crossval, evaluate, infer,
/// explain, embed, synth). Diagnostics go to stderr.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace pyroclass::cli
