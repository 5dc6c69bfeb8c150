// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_TOOLS_CLI_H_
#define CDTSE_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace cdtse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime failure
inline constexpr int kExitUsage = 2;    // usage or validation error

// Runs `cdtse <args...>`; args excludes the program name.
int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace cdtse::cli

#endif  // CDTSE_TOOLS_CLI_H_
