#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gridswitch::cli {

enum ExitCode : int { kOk = 0, kNumerical = 1, kConfig = 2 };

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridswitch::cli
