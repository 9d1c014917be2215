#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace smoke {

/// Interleaved row-major 8-bit image (ch = 1 grayscale, 3 RGB).
struct ImageU8 {
  int h = 0;
  int w = 0;
  int ch = 1;
  std::vector<std::uint8_t> px;

  ImageU8() = default;
  ImageU8(int h_, int w_, int ch_, std::uint8_t fill = 0)
      : h(h_), w(w_), ch(ch_),
        px(static_cast<std::size_t>(h_) * w_ * ch_, fill) {}

  bool empty() const { return px.empty(); }
  std::uint8_t& at(int y, int x, int c = 0) {
    return px[(static_cast<std::size_t>(y) * w + x) * ch + c];
  }
  std::uint8_t at(int y, int x, int c = 0) const {
    return px[(static_cast<std::size_t>(y) * w + x) * ch + c];
  }
};

/// Interleaved row-major double image; the working type for solver math and
/// saliency maps (values nominally in [0, 1]).
struct ImageF {
  int h = 0;
  int w = 0;
  int ch = 1;
  std::vector<double> px;

  ImageF() = default;
  ImageF(int h_, int w_, int ch_, double fill = 0.0)
      : h(h_), w(w_), ch(ch_),
        px(static_cast<std::size_t>(h_) * w_ * ch_, fill) {}

  bool empty() const { return px.empty(); }
  double& at(int y, int x, int c = 0) {
    return px[(static_cast<std::size_t>(y) * w + x) * ch + c];
  }
  double at(int y, int x, int c = 0) const {
    return px[(static_cast<std::size_t>(y) * w + x) * ch + c];
  }
};

inline ImageF to_float(const ImageU8& img) {
  ImageF out(img.h, img.w, img.ch);
  for (std::size_t i = 0; i < img.px.size(); ++i)
    out.px[i] = img.px[i] / 255.0;
  return out;
}

/// Round-half-away-from-zero quantization of [0,1] values to 8 bits.
inline ImageU8 to_u8(const ImageF& img) {
  ImageU8 out(img.h, img.w, img.ch);
  for (std::size_t i = 0; i < img.px.size(); ++i) {
    const double v = img.px[i] < 0.0 ? 0.0 : (img.px[i] > 1.0 ? 1.0 : img.px[i]);
    out.px[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

inline ImageU8 to_gray(const ImageU8& rgb) {
  if (rgb.ch == 1) return rgb;
  if (rgb.ch != 3)
    throw std::invalid_argument("to_gray: expected 1 or 3 channels");
  ImageU8 out(rgb.h, rgb.w, 1);
  for (int y = 0; y < rgb.h; ++y)
    for (int x = 0; x < rgb.w; ++x) {
      // BT.601 luma
      const double g = 0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) +
                       0.114 * rgb.at(y, x, 2);
      out.at(y, x) = static_cast<std::uint8_t>(std::lround(g));
    }
  return out;
}

}  // namespace smoke
