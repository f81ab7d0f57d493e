#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dirspglm::cli {

/// Runs one command line (args excludes the program name). Results go to
/// `out`; failures print a JSON error object to `err` and return nonzero.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dirspglm::cli
