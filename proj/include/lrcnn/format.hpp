#pragma once

#include <string>
#include <string_view>

namespace lrcnn {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Strict parse of a whole string; throws std::invalid_argument otherwise.
double parse_double(std::string_view s);
unsigned long long parse_unsigned(std::string_view s);

}  // namespace lrcnn
