#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mipseg::cli {

// Runs one subcommand. `args` excludes the program name. Results go to `out`,
// diagnostics to `err`. Returns 0 on success, 2 on invalid input or usage,
// 1 on runtime failure.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mipseg::cli
