#pragma once

#include <ostream>

namespace sybilwall {

// Subcommands run, sweep, topology and validate. Returns the process exit
// code: 0 ok, 2 config or usage error, 3 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sybilwall
