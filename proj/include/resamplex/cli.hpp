#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace resamplex {

/// Runs the command line `args` (without the program name). Returns the
/// process exit code: 0 success, 1 computation error, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace resamplex
