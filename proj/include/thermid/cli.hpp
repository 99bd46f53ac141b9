#pragma once

#include <iosfwd>

namespace thermid::cli {

/// Runs the `thermid` command line in-process. Returns the exit code: 0 on
/// success, 1 for usage errors, 2 for data or model errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace thermid::cli
