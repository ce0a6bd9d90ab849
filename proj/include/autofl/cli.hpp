#pragma once

#include <iosfwd>

namespace autofl {

/// Entry point of the `autofl` command line. Returns the process exit status:
/// 0 when no error-class event occurred.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace autofl
