#pragma once

#include <string>
#include <string_view>

namespace csumlab {

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

// Strict parse of a full decimal string; throws Error(InvalidArgument).
double parse_double(std::string_view text);

}  // namespace csumlab
