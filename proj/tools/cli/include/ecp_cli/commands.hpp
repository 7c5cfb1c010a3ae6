#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `ecp` tool. `args` excludes the program name. Output
// goes to `out`, diagnostics to `err`; nothing calls std::exit.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecp::cli
