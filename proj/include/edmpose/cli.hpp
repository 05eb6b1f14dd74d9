#pragma once

#include <string>
#include <vector>

namespace edmpose {

// Subcommands: simulate, localize, semiphysical, compare.
// Exit codes: 0 success, 1 validation/usage error, 2 solver failure.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // without argv[0]

}  // namespace edmpose
