#pragma once

#include <ostream>

namespace gom::app {

/// Runs the `gom` command line. Returns 0 on success, 1 when a command fails
/// and 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gom::app
