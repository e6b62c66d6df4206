#pragma once
// Command-line front end. Exit status: 0 success, 1 data or I/O error,
// 2 usage error.

#include <string>
#include <vector>

namespace shotsort::cli {

int run(int argc, const char* const* argv);

// argv[0] is supplied internally; `args` holds the arguments after it.
int run(const std::vector<std::string>& args);

} // namespace shotsort::cli
