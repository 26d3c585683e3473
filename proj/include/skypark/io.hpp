#ifndef SKYPARK_IO_HPP
#define SKYPARK_IO_HPP

#include <charconv>
#include <string>

namespace skypark {

/// Shortest round-trip decimal form of a double; byte-stable across runs.
inline std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace skypark

#endif  // SKYPARK_IO_HPP
