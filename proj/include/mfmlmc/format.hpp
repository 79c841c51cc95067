#pragma once

#include <string>
#include <string_view>

namespace mfmlmc {

/// Locale-independent shortest text that round-trips exactly.
std::string format_double(double value);

/// Strict parse of a full field; throws std::invalid_argument on trailing garbage.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

}  // namespace mfmlmc
