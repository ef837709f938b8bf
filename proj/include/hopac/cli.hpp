#pragma once

#include <iosfwd>

namespace hopac::cli {

/// Runs the command line `argv`. Returns 0 on success, 2 for usage errors
/// and 1 for runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hopac::cli
