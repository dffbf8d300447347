#pragma once

#include <string>
#include <vector>

namespace sharpseg {

/// Exit codes: 0 success, 1 gradcheck failure or runtime error, 2 invalid
/// configuration or usage, 3 I/O or malformed input files.
int run_cli(const std::vector<std::string>& args);

}  // namespace sharpseg
