#pragma once

#include <cstdio>
#include <string>

namespace lqtp::detail {

/// Shortest-round-trip-safe fixed formatting so CSV output is byte-stable.
inline void append_number(std::string& out, double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  out += buffer;
}

}  // namespace lqtp::detail
