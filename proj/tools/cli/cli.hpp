#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmssn::cli {

enum ExitCode { kOk = 0, kInvalid = 1, kFailed = 2 };

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace dmssn::cli
