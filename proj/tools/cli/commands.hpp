#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace glint::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2, kTransport = 3 };

/// Parses arguments (argv[0] is the program name), runs one subcommand and
/// maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace glint::cli
