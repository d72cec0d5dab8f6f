#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace ptmvqa {

// Exit codes: 0 success, 1 usage error, 2 data/validation error.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace ptmvqa
