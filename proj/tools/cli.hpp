#pragma once

#include <iosfwd>

namespace repsq::cli {

// Exit codes: 0 ok, 1 config or parse error, 2 infeasible accuracy spec,
// 3 campaign did not terminate within n_max, 4 artifact mismatch.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace repsq::cli
