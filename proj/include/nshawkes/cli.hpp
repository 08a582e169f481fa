#pragma once

#include <string>
#include <vector>

namespace nshawkes::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 missing input file; argument
/// errors use the parser's own codes.
inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingInput = 2;

int run(int argc, char** argv);
/// Same as above with args[0] being the program name.
int run(const std::vector<std::string>& args);

} // namespace nshawkes::cli
