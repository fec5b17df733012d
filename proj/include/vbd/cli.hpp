#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vbd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitRuntime = 4;

inline constexpr const char* kVersion = "0.1.0";

// args excludes the program name. Progress goes to `out`, diagnostics to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vbd::cli
