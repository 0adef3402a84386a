#pragma once

// Command-line front end. Subcommands: estimate, benchmark, identifiability, verify.
//
// Exit codes:
//   0  success (estimate: converged or policy limit; identifiability: unique or generically unique)
//   1  error (bad input, bad flags, failed computation)
//   2  estimate stopped at the iteration limit
//   3  identifiability: not unique
//   4  identifiability: indeterminate
//   5  verify: at least one check failed

#include <iosfwd>

namespace wspice {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxIters = 2;
inline constexpr int kExitNotUnique = 3;
inline constexpr int kExitIndeterminate = 4;
inline constexpr int kExitCheckFailed = 5;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wspice
