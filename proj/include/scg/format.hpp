#pragma once

#include <array>
#include <charconv>
#include <string>

namespace scg {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  std::array<char, 32> buffer{};
  auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), ptr);
}

}  // namespace scg
