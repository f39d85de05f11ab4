#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace capsre {

/// Environment variable read for log verbosity (trace, debug, info, warn,
/// error, off).
inline constexpr const char* kLogLevelEnv = "CAPSRE_LOG_LEVEL";

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand (train, eval, predict, synth, sweep). `args` holds
/// the full argument vector including the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace capsre
