#pragma once

#include <iosfwd>

namespace adec::cli {

// Exit codes: 0 success, 1 task or backend failure, 2 configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace adec::cli
