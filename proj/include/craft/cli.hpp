#pragma once

#include <string>

namespace craft {

inline constexpr const char* kToolVersion = "craftbench 1.0.0";

/// Exit codes: 0 success, 1 partial failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the craftbench front end; safe to call repeatedly in-process.
int run_cli(int argc, const char* const* argv);

/// Parses "16/255", "0.0627" or "4" style budgets.
double parse_fraction(const std::string& text);

}  // namespace craft
