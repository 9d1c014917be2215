#include "smoke/augment.hpp"

#include <algorithm>
#include <cmath>

#include "smoke/rng.hpp"

namespace smoke {

std::pair<ImageU8, ImageU8> hide_and_seek(const ImageU8& image,
                                          const ImageU8& mask,
                                          const HideAndSeekParams& params,
                                          std::uint64_t seed) {
  if (params.p_hide < 0.0 || params.p_hide > 1.0)
    throw std::invalid_argument("hide_and_seek: p_hide outside [0,1]");
  if (!mask.empty() && (mask.h != image.h || mask.w != image.w))
    throw std::invalid_argument("hide_and_seek: mask/image size mismatch");
  ImageU8 out_img = image;
  ImageU8 out_mask = mask;
  if (mask.empty()) return {out_img, out_mask};

  int x0 = mask.w, y0 = mask.h, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x)
      if (mask.at(y, x) > 0) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {out_img, out_mask};  // empty mask

  Rng rng(seed);
  const int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
  for (int gy = 0; gy < params.grid_y; ++gy) {
    const int cy0 = y0 + static_cast<int>(static_cast<std::int64_t>(bh) * gy /
                                          params.grid_y);
    const int cy1 = y0 + static_cast<int>(static_cast<std::int64_t>(bh) *
                                          (gy + 1) / params.grid_y);
    for (int gx = 0; gx < params.grid_x; ++gx) {
      const int cx0 = x0 + static_cast<int>(static_cast<std::int64_t>(bw) *
                                            gx / params.grid_x);
      const int cx1 = x0 + static_cast<int>(static_cast<std::int64_t>(bw) *
                                            (gx + 1) / params.grid_x);
      bool intersects = false;
      for (int y = cy0; y < cy1 && !intersects; ++y)
        for (int x = cx0; x < cx1; ++x)
          if (mask.at(y, x) > 0) {
            intersects = true;
            break;
          }
      if (!intersects) continue;
      if (rng.uniform() >= params.p_hide) continue;
      for (int y = cy0; y < cy1; ++y)
        for (int x = cx0; x < cx1; ++x) {
          for (int c = 0; c < image.ch; ++c)
            out_img.at(y, x, c) = params.fill[c % 3];
          if (params.hide_mask) out_mask.at(y, x) = 0;
        }
    }
  }
  return {out_img, out_mask};
}

namespace {

/// Smooth value-noise texture: a coarse random lattice, bilinearly
/// interpolated, plus fine per-pixel jitter. Kept dark and saturated so
/// smoke (bright, desaturated) stays a color-separable class the
/// desk-scale network can learn in a short schedule.
ImageF noise_background(int size, Rng& rng) {
  const int grid = 5;
  std::vector<double> lattice(3 * grid * grid);
  double base[3];
  for (int c = 0; c < 3; ++c) base[c] = rng.uniform(0.06, 0.45);
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx)
      for (int c = 0; c < 3; ++c)
        lattice[(gy * grid + gx) * 3 + c] =
            std::clamp(base[c] + rng.uniform(-0.15, 0.15), 0.02, 0.60);
  ImageF img(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double fy = static_cast<double>(y) / size * (grid - 1);
      const double fx = static_cast<double>(x) / size * (grid - 1);
      const int iy = std::min(static_cast<int>(fy), grid - 2);
      const int ix = std::min(static_cast<int>(fx), grid - 2);
      const double ty = fy - iy, tx = fx - ix;
      for (int c = 0; c < 3; ++c) {
        const double v00 = lattice[(iy * grid + ix) * 3 + c];
        const double v01 = lattice[(iy * grid + ix + 1) * 3 + c];
        const double v10 = lattice[((iy + 1) * grid + ix) * 3 + c];
        const double v11 = lattice[((iy + 1) * grid + ix + 1) * 3 + c];
        const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                         ty * ((1 - tx) * v10 + tx * v11);
        img.at(y, x, c) = std::clamp(v + rng.uniform(-0.03, 0.03), 0.0, 1.0);
      }
    }
  return img;
}

/// Sum of rotated anisotropic Gaussian blobs; the first blob is centered
/// well inside the image with amplitude above the mask threshold, so the
/// mask is nonempty by construction.
ImageF plume_density(int size, Rng& rng) {
  ImageF rho(size, size, 1);
  const int blobs = rng.uniform_int(1, 3);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(0.25, 0.75) * size;
    const double cy = rng.uniform(0.25, 0.75) * size;
    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    const double sa = rng.uniform(0.10, 0.22) * size;
    const double sb = sa * rng.uniform(0.45, 0.85);
    const double amp = rng.uniform(0.65, 0.95);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (ct * dx + st * dy) / sa;
        const double v = (-st * dx + ct * dy) / sb;
        rho.at(y, x) += amp * std::exp(-0.5 * (u * u + v * v));
      }
  }
  return rho;
}

constexpr double kMaskThreshold = 0.30;

}  // namespace

std::vector<Sample> synth_samples(const SynthParams& params) {
  if (params.size < 8 || params.size % 8 != 0)
    throw std::invalid_argument("synth_samples: size must be divisible by 8");
  Rng rng(params.seed);
  std::vector<Sample> out;
  out.reserve(params.n_smoke + params.n_background);
  char id[32];

  for (int i = 0; i < params.n_smoke; ++i) {
    ImageF bg = noise_background(params.size, rng);
    ImageF rho = plume_density(params.size, rng);
    const double gray = rng.uniform(0.80, 0.95);
    ImageF composite = bg;
    ImageU8 mask(params.size, params.size, 1);
    int x0 = params.size, y0 = params.size, x1 = -1, y1 = -1;
    for (int y = 0; y < params.size; ++y)
      for (int x = 0; x < params.size; ++x) {
        const double a = std::min(0.95, 1.2 * rho.at(y, x));
        const double smoke_v =
            std::clamp(gray + rng.uniform(-0.02, 0.02), 0.0, 1.0);
        for (int c = 0; c < 3; ++c)
          composite.at(y, x, c) =
              a * smoke_v + (1.0 - a) * bg.at(y, x, c);
        if (rho.at(y, x) > kMaskThreshold) {
          mask.at(y, x) = 255;
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x);
          y1 = std::max(y1, y);
        }
      }
    Sample s;
    std::snprintf(id, sizeof id, "smoke_%04d", i);
    s.id = id;
    s.image = to_u8(composite);
    s.mask = std::move(mask);
    s.frame_label = 1;
    BBox box;
    box.x0 = x0;
    box.y0 = y0;
    box.x1 = x1 + 1;
    box.y1 = y1 + 1;
    box.score = rng.uniform(0.6, 1.0);
    s.boxes.push_back(box);
    out.push_back(std::move(s));
  }

  for (int i = 0; i < params.n_background; ++i) {
    ImageF bg = noise_background(params.size, rng);
    // Every other background is a hard negative: a bright, round, blurred
    // blob standing in for cloud/fog. Cold-tinted rather than neutral gray,
    // which keeps the class separable at desk scale.
    if (i % 2 == 0) {
      const double cx = rng.uniform(0.3, 0.7) * params.size;
      const double cy = rng.uniform(0.3, 0.7) * params.size;
      const double sigma = rng.uniform(0.12, 0.25) * params.size;
      const double amp = rng.uniform(0.45, 0.75);
      const double bright = rng.uniform(0.85, 1.0);
      const double tint[3] = {0.55 * bright, 0.75 * bright, bright};
      for (int y = 0; y < params.size; ++y)
        for (int x = 0; x < params.size; ++x) {
          const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                            (sigma * sigma);
          const double a = amp * std::exp(-0.5 * r2);
          for (int c = 0; c < 3; ++c)
            bg.at(y, x, c) = a * tint[c] + (1.0 - a) * bg.at(y, x, c);
        }
    }
    Sample s;
    std::snprintf(id, sizeof id, "bg_%04d", i);
    s.id = id;
    s.image = to_u8(bg);
    s.frame_label = 0;
    out.push_back(std::move(s));
  }
  return out;
}

void synth_dataset(const std::string& dir, const SynthParams& params,
                   const std::string& provenance) {
  write_dataset(dir, synth_samples(params), provenance);
}

}  // namespace smoke
