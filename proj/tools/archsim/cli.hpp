#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace archsim::cli {

/// Stable exit codes.
enum Exit : int {
    kOk = 0,
    kUsage = 1,  // bad arguments, unreadable files, unknown components
    kSchema = 2,
    kInvariant = 3,
    kDivergence = 4,
};

/// Runs one command line (`args` excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace archsim::cli
