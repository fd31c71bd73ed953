#pragma once

#include <string>
#include <string_view>

namespace ecal {

/// Shortest decimal representation that round-trips a 64-bit double.
std::string format_double(double v);

/// format_double, but integral values keep a trailing ".0" ("1.0", not "1").
/// Used for human-facing output; file formats use format_double.
std::string format_double_pretty(double v);

/// Parses a double; returns false on malformed or trailing input.
bool parse_double(std::string_view text, double& out);

/// Parses a non-negative integer; returns false on malformed input.
bool parse_uint(std::string_view text, std::uint64_t& out);

}  // namespace ecal
