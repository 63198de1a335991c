#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace layerpm::cli {

// Exit statuses of the `layerpm` tool.
enum ExitCode : int {
  kOk = 0,
  kUnknownPackage = 1,
  kGraphError = 2,
  kMissingExternal = 3,
  kBuildFailure = 4,
  kParseError = 5,
  kStateError = 6,
};

// Runs one command line (args[0] is the program name). Human output goes to
// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace layerpm::cli
