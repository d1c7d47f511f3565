#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stackgp::cli {

/// Runs one `stackgp` command line (args exclude the program name) and
/// returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stackgp::cli
