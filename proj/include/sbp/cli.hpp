#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sbp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one `sbp` invocation. args excludes the program name. Diagnostics go
// to err, command output to files or out.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace sbp::cli
