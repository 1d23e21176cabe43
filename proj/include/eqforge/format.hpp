#pragma once

// Byte-stable text output helpers.

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

namespace eqforge {

/// Shortest decimal that round-trips to the same double.
inline std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

/// Quotes a CSV field when it contains a separator, quote, or newline.
inline std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace eqforge
