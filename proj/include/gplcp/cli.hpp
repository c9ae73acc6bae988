#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gplcp {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 2 usage error, 3 input or validation error, 4 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gplcp
