#include "smoke/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smoke {

namespace {

double srgb_to_linear(std::uint8_t v) {
  const double c = v / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

}  // namespace

ImageF rgb_to_lab(const ImageU8& rgb) {
  if (rgb.ch != 3)
    throw std::invalid_argument("rgb_to_lab: expected a 3-channel image");
  // sRGB -> XYZ (IEC 61966-2-1, D65). The white point is M * (1,1,1).
  constexpr double M[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                              {0.2126729, 0.7151522, 0.0721750},
                              {0.0193339, 0.1191920, 0.9503041}};
  const double wn[3] = {M[0][0] + M[0][1] + M[0][2],
                        M[1][0] + M[1][1] + M[1][2],
                        M[2][0] + M[2][1] + M[2][2]};
  ImageF lab(rgb.h, rgb.w, 3);
  for (int y = 0; y < rgb.h; ++y)
    for (int x = 0; x < rgb.w; ++x) {
      const double r = srgb_to_linear(rgb.at(y, x, 0));
      const double g = srgb_to_linear(rgb.at(y, x, 1));
      const double b = srgb_to_linear(rgb.at(y, x, 2));
      double f[3];
      for (int i = 0; i < 3; ++i)
        f[i] = lab_f((M[i][0] * r + M[i][1] * g + M[i][2] * b) / wn[i]);
      lab.at(y, x, 0) = 116.0 * f[1] - 16.0;
      lab.at(y, x, 1) = 500.0 * (f[0] - f[1]);
      lab.at(y, x, 2) = 200.0 * (f[1] - f[2]);
    }
  return lab;
}

namespace {

struct Center {
  double L, a, b, x, y;
};

double grad_energy(const ImageF& lab, int y, int x) {
  double g = 0;
  for (int c = 0; c < 3; ++c) {
    const double dx = lab.at(y, x + 1, c) - lab.at(y, x - 1, c);
    const double dy = lab.at(y + 1, x, c) - lab.at(y - 1, x, c);
    g += dx * dx + dy * dy;
  }
  return g;
}

/// Classic SLIC post-processing: re-label 4-connected components in scan
/// order; components smaller than min_size are absorbed by the largest
/// adjacent, already re-labeled superpixel. Returns the compact label count.
int enforce_connectivity(std::vector<std::int32_t>& labels, int h, int w,
                         int min_size) {
  const std::int32_t kUnset = -1;
  std::vector<std::int32_t> out(labels.size(), kUnset);
  std::vector<std::int64_t> comp_size;
  std::vector<int> stack;
  int next = 0;
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (out[y * w + x] != kUnset) continue;
      const std::int32_t orig = labels[y * w + x];
      std::vector<std::int32_t> adjacent;
      std::vector<int> members;
      stack.assign(1, y * w + x);
      out[y * w + x] = next;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        members.push_back(p);
        const int py = p / w, px = p % w;
        for (int k = 0; k < 4; ++k) {
          const int ny = py + dy[k], nx = px + dx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int q = ny * w + nx;
          if (out[q] == kUnset && labels[q] == orig) {
            out[q] = next;
            stack.push_back(q);
          } else if (out[q] != kUnset && out[q] != next) {
            adjacent.push_back(out[q]);
          }
        }
      }
      std::int32_t adj = kUnset;
      for (std::int32_t a : adjacent)
        if (adj == kUnset || comp_size[a] > comp_size[adj] ||
            (comp_size[a] == comp_size[adj] && a < adj))
          adj = a;
      if (static_cast<int>(members.size()) < min_size && adj != kUnset) {
        for (int p : members) out[p] = adj;
        comp_size[adj] += static_cast<std::int64_t>(members.size());
      } else {
        comp_size.push_back(static_cast<std::int64_t>(members.size()));
        ++next;
      }
    }
  }
  labels.swap(out);
  return next;
}

}  // namespace

LabelMap slic(const ImageU8& image, int k_superpixels, double compactness,
              int iters, std::vector<double>* residuals) {
  const int h = image.h, w = image.w;
  const std::int64_t npix = static_cast<std::int64_t>(h) * w;
  if (k_superpixels < 1 || k_superpixels > npix)
    throw std::invalid_argument("slic: superpixel count " +
                                std::to_string(k_superpixels) +
                                " for " + std::to_string(npix) + " pixels");
  ImageU8 rgb = image;
  if (rgb.ch == 1) {
    rgb = ImageU8(h, w, 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = image.at(y, x);
  }
  const ImageF lab = rgb_to_lab(rgb);

  const double S = std::sqrt(static_cast<double>(npix) / k_superpixels);
  const int nx = std::max(1, static_cast<int>(std::lround(w / S)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / S)));
  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int cx = static_cast<int>((i + 0.5) * w / nx);
      int cy = static_cast<int>((j + 0.5) * h / ny);
      cx = std::clamp(cx, 0, w - 1);
      cy = std::clamp(cy, 0, h - 1);
      // Perturb to the lowest-gradient pixel in a 3x3 neighborhood.
      if (cx >= 1 && cx < w - 1 && cy >= 1 && cy < h - 1) {
        double best = grad_energy(lab, cy, cx);
        int by = cy, bx = cx;
        for (int oy = -1; oy <= 1; ++oy)
          for (int ox = -1; ox <= 1; ++ox) {
            const int yy = cy + oy, xx = cx + ox;
            if (yy < 1 || yy >= h - 1 || xx < 1 || xx >= w - 1) continue;
            const double g = grad_energy(lab, yy, xx);
            if (g < best) {
              best = g;
              by = yy;
              bx = xx;
            }
          }
        cy = by;
        cx = bx;
      }
      centers.push_back({lab.at(cy, cx, 0), lab.at(cy, cx, 1),
                         lab.at(cy, cx, 2), static_cast<double>(cx),
                         static_cast<double>(cy)});
    }

  const double spatial_w = (compactness / S) * (compactness / S);
  std::vector<std::int32_t> labels(npix, -1);
  std::vector<double> dist(npix);
  const int reach = static_cast<int>(std::ceil(S));

  auto dist2 = [&](const Center& c, int y, int x) {
    const double dL = lab.at(y, x, 0) - c.L;
    const double da = lab.at(y, x, 1) - c.a;
    const double db = lab.at(y, x, 2) - c.b;
    const double dxp = x - c.x;
    const double dyp = y - c.y;
    return dL * dL + da * da + db * db +
           spatial_w * (dxp * dxp + dyp * dyp);
  };

  for (int it = 0; it < iters; ++it) {
    // Seed each pixel with its current center so the assignment step can
    // only lower the residual even where search windows shift.
    for (std::int64_t p = 0; p < npix; ++p) {
      if (labels[p] >= 0)
        dist[p] = dist2(centers[labels[p]], static_cast<int>(p / w),
                        static_cast<int>(p % w));
      else
        dist[p] = std::numeric_limits<double>::infinity();
    }
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      const Center& c = centers[ci];
      const int y0 = std::max(0, static_cast<int>(c.y) - reach);
      const int y1 = std::min(h - 1, static_cast<int>(c.y) + reach);
      const int x0 = std::max(0, static_cast<int>(c.x) - reach);
      const int x1 = std::min(w - 1, static_cast<int>(c.x) + reach);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double d = dist2(c, y, x);
          if (d < dist[y * w + x]) {
            dist[y * w + x] = d;
            labels[y * w + x] = static_cast<std::int32_t>(ci);
          }
        }
    }
    if (residuals) {
      double r = 0;
      for (std::int64_t p = 0; p < npix; ++p) r += dist[p];
      residuals->push_back(r);
    }
    // Move centers to their cluster means.
    std::vector<Center> sum(centers.size(), {0, 0, 0, 0, 0});
    std::vector<std::int64_t> count(centers.size(), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::int32_t l = labels[y * w + x];
        sum[l].L += lab.at(y, x, 0);
        sum[l].a += lab.at(y, x, 1);
        sum[l].b += lab.at(y, x, 2);
        sum[l].x += x;
        sum[l].y += y;
        ++count[l];
      }
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
      if (count[ci] == 0) continue;
      const double inv = 1.0 / static_cast<double>(count[ci]);
      centers[ci] = {sum[ci].L * inv, sum[ci].a * inv, sum[ci].b * inv,
                     sum[ci].x * inv, sum[ci].y * inv};
    }
  }

  LabelMap out;
  out.h = h;
  out.w = w;
  out.labels = std::move(labels);
  const int min_size = std::max(1, static_cast<int>(S * S / 4.0));
  out.num_labels = enforce_connectivity(out.labels, h, w, min_size);
  return out;
}

ImageF region_saliency(const LabelMap& labels, const ImageF& pixel_map) {
  if (labels.h != pixel_map.h || labels.w != pixel_map.w ||
      pixel_map.ch != 1)
    throw std::invalid_argument("region_saliency: resolution mismatch");
  std::vector<double> sum(labels.num_labels, 0.0);
  std::vector<std::int64_t> count(labels.num_labels, 0);
  for (std::size_t p = 0; p < labels.labels.size(); ++p) {
    sum[labels.labels[p]] += pixel_map.px[p];
    ++count[labels.labels[p]];
  }
  ImageF out(labels.h, labels.w, 1);
  for (std::size_t p = 0; p < labels.labels.size(); ++p)
    out.px[p] = sum[labels.labels[p]] / count[labels.labels[p]];
  return out;
}

ImageU8 render_fig3(const LabelMap& labels, const ImageU8& mask,
                    const ImageU8& image) {
  if (labels.h != mask.h || labels.w != mask.w || mask.ch != 1)
    throw std::invalid_argument("render_fig3: mask resolution mismatch");
  if (labels.h != image.h || labels.w != image.w)
    throw std::invalid_argument("render_fig3: image resolution mismatch");
  const ImageU8 gray = to_gray(image);
  const int n = labels.num_labels;
  std::vector<double> gray_sum(n, 0.0);
  std::vector<std::int64_t> count(n, 0), overlap(n, 0);
  std::vector<double> cx(n, 0.0), cy(n, 0.0);
  for (int y = 0; y < labels.h; ++y)
    for (int x = 0; x < labels.w; ++x) {
      const std::int32_t l = labels.at(y, x);
      gray_sum[l] += gray.at(y, x);
      ++count[l];
      if (mask.at(y, x) > 0) ++overlap[l];
      cx[l] += x;
      cy[l] += y;
    }
  ImageU8 out(labels.h, labels.w, 1);
  for (int y = 0; y < labels.h; ++y)
    for (int x = 0; x < labels.w; ++x) {
      const std::int32_t l = labels.at(y, x);
      // Strictly more than half the pixels must overlap the smoke region.
      out.at(y, x) = 2 * overlap[l] > count[l]
                         ? 255
                         : static_cast<std::uint8_t>(
                               std::lround(gray_sum[l] / count[l]));
    }
  for (int l = 0; l < n; ++l) {
    const int mx = static_cast<int>(std::lround(cx[l] / count[l]));
    const int my = static_cast<int>(std::lround(cy[l] / count[l]));
    for (int oy = -1; oy <= 1; ++oy)
      for (int ox = -1; ox <= 1; ++ox) {
        const int yy = my + oy, xx = mx + ox;
        if (yy >= 0 && yy < out.h && xx >= 0 && xx < out.w)
          out.at(yy, xx) = 0;
      }
  }
  return out;
}

}  // namespace smoke
