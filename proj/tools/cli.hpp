#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spinsched::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;    // bad flags, invalid input, validation failures
inline constexpr int kRuntimeError = 2;  // run aborted, protocol violations, socket failures

// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spinsched::cli
