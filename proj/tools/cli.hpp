#pragma once

#include <ostream>

namespace gtc::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericError = 3;

// Runs one `gtc` invocation. Progress and results go to `out`, one-line
// failure causes to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gtc::cli
