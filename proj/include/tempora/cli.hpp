#pragma once

#include <string>
#include <vector>

namespace tempora {

/// Exit codes: 0 success, 1 check or metric failure, 2 input error,
/// 3 numerical abort.
int run_cli(int argc, char** argv);
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace tempora
