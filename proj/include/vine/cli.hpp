#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vine::cli {

/// Parses and runs one subcommand: train, reduce, serve, export-frames, inspect.
/// `args` excludes the program name. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vine::cli
