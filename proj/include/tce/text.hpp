#pragma once

#include <charconv>
#include <string>

namespace tce {

// Shortest round-trip decimal form, locale-independent (used everywhere a
// number lands in a text file so output is byte-stable across runs).
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_float(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace tce
