#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coopscene::cli {

enum ExitCode { kOk = 0, kDomainError = 1, kUsageError = 2, kDetectorFailure = 3 };

/// Parses `args` (without the program name), runs the command and returns the
/// process exit code. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coopscene::cli
