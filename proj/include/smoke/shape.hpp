#pragma once

#include <cstdint>
#include <string>

namespace smoke {

/// NCHW extent of a tensor. All four dims are always present; vectors and
/// scalars use trailing 1s (a scalar is 1x1x1x1).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  constexpr std::int64_t numel() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }
};

}  // namespace smoke
