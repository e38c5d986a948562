#pragma once

// The snapdm command-line front end, callable in-process for tests.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "snapdm/error.hpp"

namespace snapdm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

int exit_code_for(ErrorKind kind) noexcept;

// "a:b:step" (inclusive of b up to rounding) or a comma-separated list.
std::vector<double> parse_sweep(std::string_view text);

// Runs one subcommand. `args` excludes the program name. Diagnostics and
// progress go to `err`; help text goes to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace snapdm::cli
