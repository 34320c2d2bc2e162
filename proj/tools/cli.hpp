#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedmuon::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitAuditFailed = 4;

// Entry point shared by the executable and the in-process tests. `args`
// excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedmuon::cli
