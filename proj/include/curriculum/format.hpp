#pragma once

#include <cstdio>
#include <string>

namespace curriculum {

// Shortest-form-independent rendering: always 17 significant digits, so a
// value survives a text round trip bit-exactly.
inline std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

}  // namespace curriculum
