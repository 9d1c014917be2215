#pragma once

#include <array>
#include <vector>

#include "smoke/image.hpp"

namespace smoke {

struct PRPoint {
  int threshold = 0;
  double precision = 0.0;
  double recall = 0.0;
};

/// 256 points, one per binarization threshold 0..255 (predicted positive
/// means map value > threshold). Recall is non-increasing in the threshold.
struct PRCurve {
  std::array<PRPoint, 256> points;
};

/// Dataset-pooled (micro-averaged) PR curve by default; `macro` averages
/// per-image precision/recall instead. Maps and masks are 8-bit, aligned,
/// nonzero mask = positive. Precision is defined as 0 where nothing is
/// predicted; a dataset with no positive ground-truth pixel at all is
/// rejected (recall undefined).
PRCurve pr_curve(const std::vector<ImageU8>& maps,
                 const std::vector<ImageU8>& gts, bool macro = false);

/// F_beta = (1+beta^2) p r / (beta^2 p + r); 0 when p = r = 0.
double f_measure(double precision, double recall, double beta2 = 0.3);

/// Twice the mean map value, clamped to 255. Binarization keeps pixels
/// strictly above the threshold, so an all-zero map segments to nothing.
double adaptive_threshold_u8(const ImageU8& map);

/// Real-valued variant: 2*mean clamped to range_max.
double adaptive_threshold(const std::vector<double>& values,
                          double range_max);

/// Intersection over union of two binary (nonzero = member) masks; defined
/// as 1 when both are empty.
double overlap(const ImageU8& a, const ImageU8& b);

struct ImageStatsResult {
  double hist_contrast = 0.0;  // Chi-square distance, >= 0
  double size_ratio = 0.0;     // |mask| / (H*W)
  double thickness = 0.0;      // mean gray value over the mask, 0..255
  double dispersion = 0.0;     // mean squared distance to the mask centroid
};

/// The four per-image statistics: Chi-square distance between the 32-bin
/// per-channel histograms of the smoke region and the background (summed
/// over R,G,B), region size ratio, thickness, and spatial dispersion.
/// Rejects an empty mask or an empty background.
ImageStatsResult image_stats(const ImageU8& rgb, const ImageU8& mask);

}  // namespace smoke
