#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nsq {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `nsq` subcommand. Artifacts go to `--out` when given, otherwise
/// to `out`; errors are written to `err` as a JSON object.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nsq
