#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smoe::cli {

// Exit codes: 0 success, 1 a pipeline stage failed, 2 bad usage.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smoe::cli
