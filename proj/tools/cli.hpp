#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stagan::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Entry point of the `stagan` tool with injectable streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stagan::cli
