#pragma once

#include <string>
#include <vector>

namespace regionedit {

// Full command-line surface; returns the process exit code.
// 0 = success, 1 = bad usage / validation, 2 = runtime failure.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace regionedit
