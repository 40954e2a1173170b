#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kArtifactVersion = "1.0.0";

// Runs the rfl_lab command line. `args` excludes the program name. Output
// that the command produces goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace lab
