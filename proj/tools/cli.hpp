#pragma once

#include <iosfwd>

namespace tokforge::cli {

// Runs the tokforge command line. Returns 0 on success, 1 on usage errors and
// 2 on data errors.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace tokforge::cli
