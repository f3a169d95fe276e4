#pragma once

#include <iosfwd>

namespace egoyaw {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitPipeline = 1, kExitUsage = 2 };

/// Entry point of the `egoyaw` command line tool. Subcommands: simulate,
/// targets, cycle, fit3d, eval, version.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace egoyaw
