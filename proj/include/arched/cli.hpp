#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arched::cli {

enum ExitCode { k_ok = 0, k_usage = 1, k_data = 2, k_backend = 3 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace arched::cli
