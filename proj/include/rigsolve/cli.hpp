#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rigsolve {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNotConverged = 3;

/// Entry point of the `rigsolve` tool. `args` excludes the program name.
/// Diagnostics go to `err` as one line: "error[CODE]: description".
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rigsolve
