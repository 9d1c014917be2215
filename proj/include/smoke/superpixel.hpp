#pragma once

#include <cstdint>
#include <vector>

#include "smoke/image.hpp"

namespace smoke {

/// Dense superpixel assignment; labels are compact in [0, num_labels) and
/// each label's pixel set is 4-connected after enforcement.
struct LabelMap {
  int h = 0;
  int w = 0;
  int num_labels = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * w + x];
  }
};

/// sRGB (8-bit, D65) to CIE L*a*b*. L in [0, 100]; the white point is the
/// conversion matrix applied to (1,1,1), so pure white maps to exactly
/// (100, 0, 0).
ImageF rgb_to_lab(const ImageU8& rgb);

/// SLIC superpixels: K-means in (L,a,b,x,y) with distance
/// D^2 = d_lab^2 + (m/S)^2 d_xy^2, seeds on a sqrt(HW/K) grid perturbed to
/// the lowest-gradient pixel in a 3x3 neighborhood, assignment restricted
/// to 2Sx2S windows (lowest label wins ties), fragments smaller than S^2/4
/// merged into an adjacent superpixel.
///
/// `residuals`, when given, receives the sum of squared within-cluster
/// distances after every assignment pass; the sequence is non-increasing.
LabelMap slic(const ImageU8& image, int k_superpixels, double compactness,
              int iters, std::vector<double>* residuals = nullptr);

/// Region-level stand-in: every pixel replaced by the mean saliency of its
/// superpixel.
ImageF region_saliency(const LabelMap& labels, const ImageF& pixel_map);

/// Rendering of the superpixel overlay: superpixels whose overlap with the
/// (nonzero) mask is strictly greater than 50% are white, the rest take
/// their mean gray value; a small black block marks each superpixel center.
ImageU8 render_fig3(const LabelMap& labels, const ImageU8& mask,
                    const ImageU8& image);

}  // namespace smoke
