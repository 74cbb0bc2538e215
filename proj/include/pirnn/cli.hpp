#pragma once

#include <iosfwd>

namespace pirnn::cli {

// Exit codes: 0 success, 1 usage error, 2 data or schema error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pirnn::cli
