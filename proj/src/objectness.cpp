#include "smoke/objectness.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace smoke {

namespace {

std::string box_str(const BBox& b) {
  return "[" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
         std::to_string(b.x1) + "," + std::to_string(b.y1) +
         " score=" + std::to_string(b.score) + "]";
}

void validate(const BBox& b, int h, int w) {
  if (!(b.x0 < b.x1) || !(b.y0 < b.y1))
    throw std::invalid_argument("objectness: degenerate box " + box_str(b));
  if ((b.x1 - b.x0) * (b.y1 - b.y0) < 1.0)
    throw std::invalid_argument("objectness: box area < 1 px " + box_str(b));
  if (b.x0 < 0 || b.y0 < 0 || b.x1 > w || b.y1 > h)
    throw std::invalid_argument("objectness: box outside " +
                                std::to_string(w) + "x" + std::to_string(h) +
                                " bounds " + box_str(b));
  if (b.score < 0.0 || b.score > 1.0)
    throw std::invalid_argument("objectness: confidence outside [0,1] " +
                                box_str(b));
}

}  // namespace

ImageF objectness_map(const std::vector<BBox>& boxes, int h, int w,
                      const ObjectnessParams& params) {
  if (params.lambda < 0.0)
    throw std::invalid_argument("objectness: lambda must be >= 0");
  for (const BBox& b : boxes) validate(b, h, w);

  ImageF map(h, w, 1);
  for (const BBox& b : boxes) {
    const double cx = 0.5 * (b.x0 + b.x1);
    const double cy = 0.5 * (b.y0 + b.y1);
    const double half_diag =
        0.5 * std::hypot(b.x1 - b.x0, b.y1 - b.y0);
    const double b2 = b.score * b.score;
    // Pixel centers covered by the half-open box.
    const int yl = static_cast<int>(std::ceil(b.y0 - 0.5));
    const int yh = static_cast<int>(std::ceil(b.y1 - 0.5));
    const int xl = static_cast<int>(std::ceil(b.x0 - 0.5));
    const int xh = static_cast<int>(std::ceil(b.x1 - 0.5));
    for (int y = yl; y < yh; ++y) {
      for (int x = xl; x < xh; ++x) {
        const double d =
            std::hypot(x + 0.5 - cx, y + 0.5 - cy) / half_diag;
        map.at(y, x) += b2 * std::exp(-params.lambda * d);
      }
    }
  }
  for (double& v : map.px) v = std::sqrt(v);
  return map;
}

ImageU8 normalize_u8(const ImageF& map) {
  double maxv = 0.0;
  for (double v : map.px) {
    if (v < 0.0)
      throw std::invalid_argument("normalize_u8: negative input value");
    if (v > maxv) maxv = v;
  }
  ImageU8 out(map.h, map.w, 1);
  if (maxv == 0.0) return out;
  for (std::size_t i = 0; i < map.px.size(); ++i)
    out.px[i] =
        static_cast<std::uint8_t>(std::lround(map.px[i] / maxv * 255.0));
  return out;
}

ImageF objectness_feature(const std::vector<BBox>& boxes, int h, int w,
                          const ObjectnessParams& params) {
  return to_float(normalize_u8(objectness_map(boxes, h, w, params)));
}

}  // namespace smoke
