#pragma once

#include <iosfwd>

namespace formula::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipelineError = 1;
inline constexpr int kExitUsageError = 2;

/// Entry point of the `formula` tool: detect | eval | synth | bench.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace formula::cli
