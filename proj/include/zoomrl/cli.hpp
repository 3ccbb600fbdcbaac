#pragma once

#include <string>
#include <vector>

namespace zoomrl {

// Entry point for the zoomrl tool. `args` excludes the program name.
// Exit codes: 0 success, 1 domain failure, 2 usage error.
int run_cli(std::vector<std::string> args);

}  // namespace zoomrl
