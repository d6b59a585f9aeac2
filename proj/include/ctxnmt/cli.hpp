#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctxnmt {

// args is argv as given to main, program name first. Exit codes: 0 success,
// 1 runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctxnmt
