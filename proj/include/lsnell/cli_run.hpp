#pragma once
#include <string>
#include <vector>

namespace lsnell {

// The command-line front end. Exit codes: 0 = all internal cross-checks pass,
// 1 = a check failed or a solver error occurred, 2 = input/usage error.
// Findings (a duality gap, a refuted consistency property) are reported, not
// treated as failures. `args` excludes the program name.
int run_cli(std::vector<std::string> args);
int run_cli(int argc, char** argv);

} // namespace lsnell
