#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sail::cli {

// Exit codes: 0 success (migrate: goal reached), 1 migration failed,
// 2 configuration/usage error, 3 infrastructure error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sail::cli
