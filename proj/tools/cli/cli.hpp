#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace coherence::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
// `args` excludes the program name. Reports go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coherence::cli
