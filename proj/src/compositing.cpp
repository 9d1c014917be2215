#include "smoke/compositing.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "smoke/errors.hpp"

namespace smoke {

namespace {

struct Region {
  std::vector<int> pixels;           // target-coordinate flat indices
  std::vector<std::int32_t> index;   // target pixel -> unknown index or -1
};

Region collect_region(const CompositeJob& job) {
  const ImageU8& m = job.source_mask;
  const int th = job.target.h, tw = job.target.w;
  Region r;
  r.index.assign(static_cast<std::size_t>(th) * tw, -1);
  for (int sy = 0; sy < m.h; ++sy)
    for (int sx = 0; sx < m.w; ++sx) {
      if (m.at(sy, sx) == 0) continue;
      const int ty = sy + job.offset_y, tx = sx + job.offset_x;
      if (ty < 1 || ty >= th - 1 || tx < 1 || tx >= tw - 1)
        throw std::invalid_argument(
            "composite: region pixel (" + std::to_string(tx) + "," +
            std::to_string(ty) + ") outside the target interior");
      if (sy < 1 || sy >= m.h - 1 || sx < 1 || sx >= m.w - 1)
        throw std::invalid_argument(
            "composite: region touches the source border at (" +
            std::to_string(sx) + "," + std::to_string(sy) + ")");
      r.index[ty * tw + tx] = static_cast<std::int32_t>(r.pixels.size());
      r.pixels.push_back(ty * tw + tx);
    }
  if (r.pixels.empty())
    throw std::invalid_argument("composite: empty region mask");
  return r;
}

/// y = A x for the Dirichlet 5-point Laplacian restricted to the region.
void apply_laplacian(const Region& r, int tw, const std::vector<double>& x,
                     std::vector<double>& y) {
  const int n = static_cast<int>(r.pixels.size());
  for (int i = 0; i < n; ++i) {
    const int p = r.pixels[i];
    double acc = 4.0 * x[i];
    const int nb[4] = {p - tw, p + tw, p - 1, p + 1};
    for (int q : nb) {
      const std::int32_t j = r.index[q];
      if (j >= 0) acc -= x[j];
    }
    y[i] = acc;
  }
}

}  // namespace

CompositeResult composite_poisson(const CompositeJob& job) {
  if (job.source.ch != 3 || job.target.ch != 3 || job.source_mask.ch != 1)
    throw std::invalid_argument(
        "composite_poisson: expected RGB source/target and 1-channel mask");
  if (job.source_mask.h != job.source.h || job.source_mask.w != job.source.w)
    throw std::invalid_argument("composite_poisson: mask/source size mismatch");
  const Region region = collect_region(job);
  const int tw = job.target.w;
  const int n = static_cast<int>(region.pixels.size());

  CompositeResult res;
  res.image = to_float(job.target);

  const ImageF src = to_float(job.source);
  std::vector<double> b(n), x(n), rvec(n), p(n), ap(n);

  for (int c = 0; c < 3; ++c) {
    // Right-hand side: lap g (from the source) plus the Dirichlet boundary
    // contribution from target pixels outside the region.
    for (int i = 0; i < n; ++i) {
      const int tp = region.pixels[i];
      const int ty = tp / tw, tx = tp % tw;
      const int sy = ty - job.offset_y, sx = tx - job.offset_x;
      double rhs = 4.0 * src.at(sy, sx, c) - src.at(sy - 1, sx, c) -
                   src.at(sy + 1, sx, c) - src.at(sy, sx - 1, c) -
                   src.at(sy, sx + 1, c);
      const int nb[4] = {tp - tw, tp + tw, tp - 1, tp + 1};
      for (int q : nb)
        if (region.index[q] < 0)
          rhs += res.image.px[static_cast<std::size_t>(q) * 3 + c];
      b[i] = rhs;
    }

    // Start from the source values (a good initial guess).
    for (int i = 0; i < n; ++i) {
      const int tp = region.pixels[i];
      const int sy = tp / tw - job.offset_y, sx = tp % tw - job.offset_x;
      x[i] = src.at(sy, sx, c);
    }

    int iters = 0;
    double max_r = 0.0;
    auto true_residual = [&]() {
      apply_laplacian(region, tw, x, ap);
      double m = 0.0;
      for (int i = 0; i < n; ++i) {
        rvec[i] = b[i] - ap[i];
        m = std::max(m, std::fabs(rvec[i]));
      }
      return m;
    };

    if (job.solver == PoissonSolver::kGaussSeidel) {
      max_r = true_residual();
      while (max_r >= job.tol && iters < job.max_iters) {
        for (int i = 0; i < n; ++i) {
          const int tp = region.pixels[i];
          double acc = b[i];
          const int nb[4] = {tp - tw, tp + tw, tp - 1, tp + 1};
          for (int q : nb) {
            const std::int32_t j = region.index[q];
            if (j >= 0) acc += x[j];
          }
          x[i] = acc / 4.0;
        }
        ++iters;
        max_r = true_residual();
      }
    } else {
      // Conjugate gradient on the SPD Dirichlet Laplacian. The recursive
      // residual is refreshed against the true one every 32 iterations and
      // convergence is declared on the true max-norm, which is exactly the
      // quantity the compositing contract bounds.
      max_r = true_residual();
      p = rvec;
      double rs = 0.0;
      for (int i = 0; i < n; ++i) rs += rvec[i] * rvec[i];
      while (max_r >= job.tol && iters < job.max_iters) {
        apply_laplacian(region, tw, p, ap);
        double pap = 0.0;
        for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0.0) break;  // numerically stalled
        const double alpha = rs / pap;
        for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
        ++iters;
        if (iters % 32 == 0) {
          max_r = true_residual();
          double rs_new = 0.0;
          for (int i = 0; i < n; ++i) rs_new += rvec[i] * rvec[i];
          const double beta = rs_new / rs;
          rs = rs_new;
          for (int i = 0; i < n; ++i) p[i] = rvec[i] + beta * p[i];
        } else {
          double rs_new = 0.0;
          max_r = 0.0;
          for (int i = 0; i < n; ++i) {
            rvec[i] -= alpha * ap[i];
            rs_new += rvec[i] * rvec[i];
            max_r = std::max(max_r, std::fabs(rvec[i]));
          }
          const double beta = rs_new / rs;
          rs = rs_new;
          for (int i = 0; i < n; ++i) p[i] = rvec[i] + beta * p[i];
        }
      }
      max_r = true_residual();
    }

    if (max_r >= job.tol)
      throw NumericError(
          "composite_poisson: no convergence after " +
          std::to_string(iters) + " iterations, residual " +
          std::to_string(max_r) + " (tol " + std::to_string(job.tol) + ")");
    res.iterations = std::max(res.iterations, iters);
    res.residual = std::max(res.residual, max_r);

    for (int i = 0; i < n; ++i)
      res.image.px[static_cast<std::size_t>(region.pixels[i]) * 3 + c] =
          x[i];
  }
  return res;
}

ImageF composite_alpha(const CompositeJob& job, const ImageF& alpha) {
  if (alpha.h != job.source.h || alpha.w != job.source.w || alpha.ch != 1)
    throw std::invalid_argument(
        "composite_alpha: alpha must be 1-channel at the source size");
  if (job.source.ch != job.target.ch)
    throw std::invalid_argument("composite_alpha: channel mismatch");
  ImageF out = to_float(job.target);
  const ImageF src = to_float(job.source);
  for (int sy = 0; sy < job.source.h; ++sy) {
    const int ty = sy + job.offset_y;
    if (ty < 0 || ty >= out.h) continue;
    for (int sx = 0; sx < job.source.w; ++sx) {
      const int tx = sx + job.offset_x;
      if (tx < 0 || tx >= out.w) continue;
      const double a = alpha.at(sy, sx);
      for (int c = 0; c < out.ch; ++c)
        out.at(ty, tx, c) =
            a * src.at(sy, sx, c) + (1.0 - a) * out.at(ty, tx, c);
    }
  }
  return out;
}

}  // namespace smoke
