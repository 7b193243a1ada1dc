#include "csumlab/decimal.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <system_error>

#include "csumlab/error.hpp"

namespace csumlab {

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFiniteInput, "cannot format a non-finite double");
  }
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) {
    throw Error(ErrorCode::InvalidArgument, "double formatting failed");
  }
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "not a decimal number: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace csumlab
