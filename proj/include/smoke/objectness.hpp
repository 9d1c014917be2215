#pragma once

#include <vector>

#include "smoke/image.hpp"

namespace smoke {

/// Axis-aligned box with a detector confidence. Coordinates follow the
/// half-open pixel convention: pixel (x, y) is covered iff its center
/// (x+0.5, y+0.5) lies in [x0, x1) x [y0, y1).
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double score = 0;
};

struct ObjectnessParams {
  /// Decay rate of the distance weight exp(-lambda * d).
  double lambda = 1.0;
};

/// Per-pixel objectness: s_p = sqrt(sum_i b_i^2 * [p in B_i] *
/// exp(-lambda * d(p, B_i))), where d is the Euclidean distance from the
/// pixel center to the box center, normalized by half the box diagonal
/// (d = 1 at box corners). Pixels covered by no box are exactly 0.
/// Boxes outside the image bounds, degenerate (< 1 px area), or with a
/// score outside [0, 1] are rejected naming the offending box.
ImageF objectness_map(const std::vector<BBox>& boxes, int h, int w,
                      const ObjectnessParams& params);

/// Linear [0, max] -> [0, 255] with round-half-away-from-zero; an all-zero
/// map stays all-zero. Rejects negative inputs.
ImageU8 normalize_u8(const ImageF& map);

/// The map as it enters fusion: the 8-bit normalization rescaled to [0, 1],
/// keeping bit-parity with the exported heatmap.
ImageF objectness_feature(const std::vector<BBox>& boxes, int h, int w,
                          const ObjectnessParams& params);

}  // namespace smoke
