#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace a2r::cli {

// Runs one CLI invocation. Exit codes: 0 success, 1 usage error, 2 data or
// format error. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace a2r::cli
