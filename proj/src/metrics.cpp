#include "smoke/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "smoke/errors.hpp"

namespace smoke {

namespace {

/// Cumulative counts per threshold from one map/mask pair: pos_ge[t] =
/// positive-map pixels with value > t, etc., computed from a 256-bin
/// histogram so the full curve costs one pass.
struct Counts {
  std::array<std::int64_t, 256> tp{};
  std::array<std::int64_t, 256> fp{};
  std::int64_t gt_pos = 0;
};

Counts count_pair(const ImageU8& map, const ImageU8& gt) {
  if (map.h != gt.h || map.w != gt.w || map.ch != 1 || gt.ch != 1)
    throw std::invalid_argument("pr_curve: map/mask mismatch");
  std::array<std::int64_t, 256> hist_pos{}, hist_all{};
  Counts c;
  for (std::size_t i = 0; i < map.px.size(); ++i) {
    ++hist_all[map.px[i]];
    if (gt.px[i] > 0) {
      ++hist_pos[map.px[i]];
      ++c.gt_pos;
    }
  }
  // value > t  <=>  value in (t, 255]
  std::int64_t acc_pos = 0, acc_all = 0;
  for (int t = 255; t >= 0; --t) {
    c.tp[t] = acc_pos;
    c.fp[t] = acc_all - acc_pos;
    acc_pos += hist_pos[t];
    acc_all += hist_all[t];
  }
  return c;
}

}  // namespace

PRCurve pr_curve(const std::vector<ImageU8>& maps,
                 const std::vector<ImageU8>& gts, bool macro) {
  if (maps.size() != gts.size() || maps.empty())
    throw std::invalid_argument("pr_curve: need equally many maps and masks");
  std::vector<Counts> counts;
  counts.reserve(maps.size());
  std::int64_t total_gt = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    counts.push_back(count_pair(maps[i], gts[i]));
    total_gt += counts.back().gt_pos;
  }
  if (total_gt == 0)
    throw DataError("pr_curve: no positive ground-truth pixels in the set");

  PRCurve curve;
  for (int t = 0; t < 256; ++t) {
    PRPoint& pt = curve.points[t];
    pt.threshold = t;
    if (macro) {
      double psum = 0, rsum = 0;
      for (const Counts& c : counts) {
        const std::int64_t pred = c.tp[t] + c.fp[t];
        psum += pred == 0 ? 0.0 : static_cast<double>(c.tp[t]) / pred;
        rsum += c.gt_pos == 0 ? 0.0
                              : static_cast<double>(c.tp[t]) / c.gt_pos;
      }
      pt.precision = psum / static_cast<double>(counts.size());
      pt.recall = rsum / static_cast<double>(counts.size());
    } else {
      std::int64_t tp = 0, fp = 0;
      for (const Counts& c : counts) {
        tp += c.tp[t];
        fp += c.fp[t];
      }
      pt.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
      pt.recall = static_cast<double>(tp) / total_gt;
    }
  }
  return curve;
}

double f_measure(double precision, double recall, double beta2) {
  if (precision < 0 || precision > 1 || recall < 0 || recall > 1)
    throw std::invalid_argument("f_measure: precision/recall outside [0,1]");
  if (precision == 0.0 && recall == 0.0) return 0.0;
  return (1.0 + beta2) * precision * recall /
         (beta2 * precision + recall);
}

double adaptive_threshold_u8(const ImageU8& map) {
  if (map.px.empty())
    throw std::invalid_argument("adaptive_threshold: empty map");
  std::int64_t sum = 0;
  for (auto v : map.px) sum += v;
  const double mean = static_cast<double>(sum) / map.px.size();
  return std::min(2.0 * mean, 255.0);
}

double adaptive_threshold(const std::vector<double>& values,
                          double range_max) {
  if (values.empty())
    throw std::invalid_argument("adaptive_threshold: empty map");
  double sum = 0;
  for (double v : values) sum += v;
  const double t = 2.0 * sum / static_cast<double>(values.size());
  return std::min(t, range_max);
}

double overlap(const ImageU8& a, const ImageU8& b) {
  if (a.h != b.h || a.w != b.w || a.ch != 1 || b.ch != 1)
    throw std::invalid_argument("overlap: mask size mismatch");
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    const bool pa = a.px[i] > 0, pb = b.px[i] > 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

ImageStatsResult image_stats(const ImageU8& rgb, const ImageU8& mask) {
  if (rgb.ch != 3 || mask.ch != 1 || rgb.h != mask.h || rgb.w != mask.w)
    throw std::invalid_argument("image_stats: expected aligned RGB + mask");
  std::int64_t npos = 0;
  for (auto v : mask.px) npos += v > 0;
  const std::int64_t total = static_cast<std::int64_t>(rgb.h) * rgb.w;
  if (npos == 0) throw std::invalid_argument("image_stats: empty mask");
  // A full-image mask is allowed: size_ratio is read against the whole
  // image, and the background histogram is then all zeros.

  constexpr int kBins = 32;
  constexpr double kEps = 1e-10;
  double fg[3][kBins] = {};
  double bg[3][kBins] = {};
  double gray_sum = 0.0;
  double cx = 0.0, cy = 0.0;
  for (int y = 0; y < rgb.h; ++y)
    for (int x = 0; x < rgb.w; ++x) {
      const bool pos = mask.at(y, x) > 0;
      for (int c = 0; c < 3; ++c) {
        const int bin = rgb.at(y, x, c) * kBins / 256;
        (pos ? fg : bg)[c][bin] += 1.0;
      }
      if (pos) {
        gray_sum += 0.299 * rgb.at(y, x, 0) + 0.587 * rgb.at(y, x, 1) +
                    0.114 * rgb.at(y, x, 2);
        cx += x;
        cy += y;
      }
    }

  ImageStatsResult r;
  const double nf = static_cast<double>(npos);
  const double nb = static_cast<double>(total - npos);
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < kBins; ++k) {
      const double h1 = fg[c][k] / nf;
      const double h2 = nb > 0 ? bg[c][k] / nb : 0.0;
      r.hist_contrast += (h1 - h2) * (h1 - h2) / (h1 + h2 + kEps);
    }
  r.size_ratio = nf / static_cast<double>(total);
  r.thickness = gray_sum / nf;
  cx /= nf;
  cy /= nf;
  double disp = 0.0;
  for (int y = 0; y < rgb.h; ++y)
    for (int x = 0; x < rgb.w; ++x)
      if (mask.at(y, x) > 0)
        disp += (x - cx) * (x - cx) + (y - cy) * (y - cy);
  r.dispersion = disp / nf;
  return r;
}

}  // namespace smoke
