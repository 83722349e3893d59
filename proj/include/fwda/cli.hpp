#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fwda::cli {

// Entry point shared by the binary and the CLI tests. args excludes the
// program name. Exit codes: 0 success, 1 data/runtime failures (fwda::Error),
// 2 argument errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fwda::cli
