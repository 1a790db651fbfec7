#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace supcfa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one invocation; `args` excludes the program name. Progress and errors
/// go to `err`; data goes only to files.
int run(const std::vector<std::string>& args, std::ostream& err);

} // namespace supcfa::cli
