#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ppt {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitWeights = 3;
inline constexpr int kExitImage = 4;
inline constexpr int kExitSchedule = 5;

/// Entry point of the `ppt` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ppt
