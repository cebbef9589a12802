// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sspt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Parses "MIN:MAX" or a single value (degenerate range). Throws ConfigError
/// whose message starts with `flag`.
std::pair<double, double> parse_range(const std::string& text, const std::string& flag);

/// Runs one `sspt` invocation; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, const char* const* argv);

} // namespace sspt::cli
