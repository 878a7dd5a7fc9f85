#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace zclip::detail {

// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace zclip::detail
