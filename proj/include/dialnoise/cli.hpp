#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dialnoise::cli {

/// Runs the command line `args` (args[0] is the program name). Returns the
/// exit code: 0 success, 1 invalid input or usage, 2 I/O failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace dialnoise::cli
