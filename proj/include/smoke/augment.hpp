#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "smoke/dataset.hpp"
#include "smoke/image.hpp"

namespace smoke {

struct HideAndSeekParams {
  int grid_x = 4;
  int grid_y = 4;
  double p_hide = 0.5;
  /// Fill value for hidden cells (the training-set mean color).
  std::array<std::uint8_t, 3> fill = {128, 128, 128};
  /// When false only the image is occluded and the mask is left intact.
  bool hide_mask = true;
};

/// Grid occlusion over the mask's bounding box. The box is split into
/// grid_x x grid_y cells; every cell that intersects the smoke region draws
/// one uniform [0,1) variate (row-major cell order, Rng::uniform) and is
/// hidden when the draw is below p_hide: image pixels take the fill color
/// and mask pixels are cleared. Pixels outside the bounding box are never
/// touched. An empty mask returns the pair unchanged.
std::pair<ImageU8, ImageU8> hide_and_seek(const ImageU8& image,
                                          const ImageU8& mask,
                                          const HideAndSeekParams& params,
                                          std::uint64_t seed);

struct SynthParams {
  int n_smoke = 64;
  int n_background = 64;
  int size = 64;  // square images, divisible by 8
  std::uint64_t seed = 0;
};

/// Generates the desk-scale synthetic dataset in memory: textured
/// backgrounds, anisotropic Gaussian smoke plumes with exact masks and
/// tight bounding boxes (confidence in [0.6, 1.0], frame label 1), and
/// background samples of which half are hard negatives (bright blurred
/// blobs, frame label 0). Deterministic for a fixed seed.
std::vector<Sample> synth_samples(const SynthParams& params);

/// synth_samples + write_dataset into `dir`.
void synth_dataset(const std::string& dir, const SynthParams& params,
                   const std::string& provenance);

}  // namespace smoke
