#pragma once

#include <iosfwd>

namespace cropxai {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;      // training, explanation or service failure
inline constexpr int kExitUsage = 2;        // bad arguments, unreadable files, bad artifacts
inline constexpr int kExitUnsupported = 3;  // method not available for the model kind

// Entry point of the `cropxai` tool: train, evaluate, predict, explain, serve.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cropxai
