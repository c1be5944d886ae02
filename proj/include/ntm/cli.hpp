#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ntm::cli {

/// Runs one command line (args[0] is the program name).
/// Exit codes: 0 success, 1 usage error, 2 runtime error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ntm::cli
