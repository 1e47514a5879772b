#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace defcast::cli {

// Exit codes. Stable across versions.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kInputError = 2;

// Entry point for the `defcast` tool; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace defcast::cli
