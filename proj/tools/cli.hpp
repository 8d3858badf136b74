#pragma once

#include <iosfwd>

namespace spnet {

// Runs the command line tool. Returns 0 on success, 1 when validation fails
// (bad input, failed gradient check) and 2 for usage errors.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spnet
