#pragma once

#include "fedm/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fedm::cli {

/// Exit status for each error kind: 2 config, 3 data, 4 numerical, 5 protocol.
int exit_code(ErrorKind kind);

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Help text of a subcommand, or of the top level for "".
std::string help(const std::string& subcommand);

/// Every long option name (with leading dashes) a subcommand accepts.
std::vector<std::string> option_names(const std::string& subcommand);

/// Subcommand names.
std::vector<std::string> subcommands();

}  // namespace fedm::cli
