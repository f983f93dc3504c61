#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vsensor::cli {

// Exit codes: 0 success, 1 data/schema/config error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

// Runs one `vsensor` invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vsensor::cli
