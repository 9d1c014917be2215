#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "smoke/augment.hpp"
#include "smoke/compositing.hpp"
#include "smoke/errors.hpp"
#include "smoke/rng.hpp"

using namespace smoke;

namespace {

ImageU8 noise_rgb(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageU8 img(h, w, 3);
  for (auto& v : img.px)
    v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

ImageU8 disk_mask(int h, int w, int cy, int cx, int r) {
  ImageU8 m(h, w, 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
        m.at(y, x) = 255;
  return m;
}

/// The acceptance check, computed from scratch: max over region pixels of
/// |lap(composite) - lap(source)| with target values outside the region.
double laplacian_residual(const CompositeJob& job, const ImageF& composite) {
  const ImageF src = to_float(job.source);
  double worst = 0.0;
  for (int sy = 0; sy < job.source_mask.h; ++sy)
    for (int sx = 0; sx < job.source_mask.w; ++sx) {
      if (job.source_mask.at(sy, sx) == 0) continue;
      const int ty = sy + job.offset_y, tx = sx + job.offset_x;
      for (int c = 0; c < 3; ++c) {
        const double lf = 4 * composite.at(ty, tx, c) -
                          composite.at(ty - 1, tx, c) -
                          composite.at(ty + 1, tx, c) -
                          composite.at(ty, tx - 1, c) -
                          composite.at(ty, tx + 1, c);
        const double lg = 4 * src.at(sy, sx, c) - src.at(sy - 1, sx, c) -
                          src.at(sy + 1, sx, c) - src.at(sy, sx - 1, c) -
                          src.at(sy, sx + 1, c);
        worst = std::max(worst, std::fabs(lf - lg));
      }
    }
  return worst;
}

}  // namespace

TEST_CASE("composite_poisson") {
  SUBCASE("constant source on matching constant target is the target") {
    CompositeJob job;
    job.source = ImageU8(12, 12, 3, 90);
    job.source_mask = disk_mask(12, 12, 6, 6, 4);
    job.target = ImageU8(20, 20, 3, 90);
    job.offset_x = 4;
    job.offset_y = 4;
    CompositeResult res = composite_poisson(job);
    const ImageF want = to_float(job.target);
    for (std::size_t i = 0; i < want.px.size(); ++i)
      CHECK(res.image.px[i] == doctest::Approx(want.px[i]).epsilon(1e-9));
  }
  SUBCASE("linear-ramp source: residual below tolerance, independent check") {
    CompositeJob job;
    job.source = ImageU8(14, 14, 3);
    for (int y = 0; y < 14; ++y)
      for (int x = 0; x < 14; ++x)
        for (int c = 0; c < 3; ++c)
          job.source.at(y, x, c) =
              static_cast<std::uint8_t>(10 + 12 * x + 3 * y);
    job.source_mask = disk_mask(14, 14, 7, 7, 5);
    job.target = ImageU8(24, 24, 3, 200);
    job.offset_x = 5;
    job.offset_y = 5;
    CompositeResult res = composite_poisson(job);
    CHECK(res.residual < 1e-6);
    CHECK(laplacian_residual(job, res.image) < 1e-6);
  }
  SUBCASE("pixels outside the region are bit-identical to the target") {
    CompositeJob job;
    job.source = noise_rgb(16, 16, 1);
    job.source_mask = disk_mask(16, 16, 8, 8, 5);
    job.target = noise_rgb(32, 32, 2);
    job.offset_x = 9;
    job.offset_y = 7;
    CompositeResult res = composite_poisson(job);
    const ImageF tf = to_float(job.target);
    for (int ty = 0; ty < 32; ++ty)
      for (int tx = 0; tx < 32; ++tx) {
        const int sy = ty - job.offset_y, sx = tx - job.offset_x;
        const bool inside = sy >= 0 && sy < 16 && sx >= 0 && sx < 16 &&
                            job.source_mask.at(sy, sx) > 0;
        if (inside) continue;
        for (int c = 0; c < 3; ++c)
          CHECK(res.image.at(ty, tx, c) == tf.at(ty, tx, c));
      }
  }
  SUBCASE("maximum principle for a zero-Laplacian source") {
    CompositeJob job;
    job.source = ImageU8(12, 12, 3, 77);  // constant => lap g = 0
    job.source_mask = disk_mask(12, 12, 6, 6, 4);
    job.target = noise_rgb(24, 24, 3);
    job.offset_x = 6;
    job.offset_y = 6;
    CompositeResult res = composite_poisson(job);
    // Boundary: target pixels 4-adjacent to the region.
    for (int c = 0; c < 3; ++c) {
      double lo = 1e9, hi = -1e9;
      const ImageF tf = to_float(job.target);
      for (int sy = 0; sy < 12; ++sy)
        for (int sx = 0; sx < 12; ++sx) {
          if (job.source_mask.at(sy, sx) == 0) continue;
          const int ty = sy + 6, tx = sx + 6;
          const int dy[4] = {1, -1, 0, 0}, dx[4] = {0, 0, 1, -1};
          for (int k = 0; k < 4; ++k) {
            const int ny = ty + dy[k], nx = tx + dx[k];
            const int msy = ny - 6, msx = nx - 6;
            const bool in_region = msy >= 0 && msy < 12 && msx >= 0 &&
                                   msx < 12 &&
                                   job.source_mask.at(msy, msx) > 0;
            if (!in_region) {
              lo = std::min(lo, tf.at(ny, nx, c));
              hi = std::max(hi, tf.at(ny, nx, c));
            }
          }
        }
      for (int sy = 0; sy < 12; ++sy)
        for (int sx = 0; sx < 12; ++sx)
          if (job.source_mask.at(sy, sx) > 0) {
            const double v = res.image.at(sy + 6, sx + 6, c);
            CHECK(v >= lo - 1e-6);
            CHECK(v <= hi + 1e-6);
          }
    }
  }
  SUBCASE("non-convergence reported with the final residual") {
    CompositeJob job;
    job.source = noise_rgb(16, 16, 4);
    job.source_mask = disk_mask(16, 16, 8, 8, 6);
    job.target = noise_rgb(32, 32, 5);
    job.offset_x = 8;
    job.offset_y = 8;
    job.max_iters = 1;
    CHECK_THROWS_WITH_AS(composite_poisson(job),
                         doctest::Contains("residual"), NumericError);
  }
  SUBCASE("Gauss-Seidel fallback converges to the same contract") {
    CompositeJob job;
    job.source = noise_rgb(12, 12, 6);
    job.source_mask = disk_mask(12, 12, 6, 6, 4);
    job.target = noise_rgb(20, 20, 7);
    job.offset_x = 4;
    job.offset_y = 4;
    job.solver = PoissonSolver::kGaussSeidel;
    CompositeResult res = composite_poisson(job);
    CHECK(laplacian_residual(job, res.image) < 1e-6);
  }
  SUBCASE("region touching the target border rejected") {
    CompositeJob job;
    job.source = noise_rgb(8, 8, 8);
    job.source_mask = disk_mask(8, 8, 4, 4, 2);
    job.target = noise_rgb(10, 10, 9);
    job.offset_x = -2;  // region would reach column 0
    job.offset_y = 2;
    CHECK_THROWS_AS(composite_poisson(job), std::invalid_argument);
  }
  SUBCASE("empty region rejected") {
    CompositeJob job;
    job.source = noise_rgb(8, 8, 10);
    job.source_mask = ImageU8(8, 8, 1, 0);
    job.target = noise_rgb(16, 16, 11);
    CHECK_THROWS_AS(composite_poisson(job), std::invalid_argument);
  }
}

TEST_CASE("composite_alpha") {
  CompositeJob job;
  job.source = noise_rgb(8, 8, 20);
  job.target = noise_rgb(16, 16, 21);
  job.offset_x = 3;
  job.offset_y = 2;
  const ImageF sf = to_float(job.source);
  const ImageF tf = to_float(job.target);

  SUBCASE("alpha 0 gives the target") {
    ImageF alpha(8, 8, 1, 0.0);
    ImageF out = composite_alpha(job, alpha);
    for (std::size_t i = 0; i < tf.px.size(); ++i)
      CHECK(out.px[i] == tf.px[i]);
  }
  SUBCASE("alpha 1 gives the source inside its extent") {
    ImageF alpha(8, 8, 1, 1.0);
    ImageF out = composite_alpha(job, alpha);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c)
          CHECK(out.at(y + 2, x + 3, c) == sf.at(y, x, c));
  }
  SUBCASE("alpha 0.5 gives the arithmetic mean") {
    ImageF alpha(8, 8, 1, 0.5);
    ImageF out = composite_alpha(job, alpha);
    CHECK(out.at(2, 3, 0) ==
          doctest::Approx(0.5 * (sf.at(0, 0, 0) + tf.at(2, 3, 0))));
  }
  SUBCASE("alpha size mismatch rejected") {
    ImageF alpha(9, 8, 1, 0.5);
    CHECK_THROWS_AS(composite_alpha(job, alpha), std::invalid_argument);
  }
}

TEST_CASE("hide_and_seek") {
  ImageU8 img = noise_rgb(32, 32, 30);
  ImageU8 mask = disk_mask(32, 32, 16, 16, 9);
  HideAndSeekParams params;

  SUBCASE("p_hide = 0 is the identity") {
    params.p_hide = 0.0;
    auto [im, mk] = hide_and_seek(img, mask, params, 7);
    CHECK(im.px == img.px);
    CHECK(mk.px == mask.px);
  }
  SUBCASE("p_hide = 1 hides every intersecting cell") {
    params.p_hide = 1.0;
    auto [im, mk] = hide_and_seek(img, mask, params, 7);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) CHECK(mk.at(y, x) == 0);
    // Pixels outside the mask bounding box untouched.
    for (int x = 0; x < 32; ++x) {
      CHECK(im.at(0, x, 0) == img.at(0, x, 0));
      CHECK(im.at(31, x, 1) == img.at(31, x, 1));
    }
    // The mask bounding box spans [7,25]x[7,25]; its center is filled.
    CHECK(im.at(16, 16, 0) == params.fill[0]);
  }
  SUBCASE("fixed seed reproduces an independently drawn reference pattern") {
    params.p_hide = 0.5;
    const std::uint64_t seed = 12345;
    auto [im, mk] = hide_and_seek(img, mask, params, seed);

    // Reference transcript: raw mt19937_64, 53-bit uniforms, one draw per
    // smoke-intersecting cell in row-major cell order.
    std::mt19937_64 eng(seed);
    auto uniform = [&]() {
      return static_cast<double>(eng() >> 11) * 0x1.0p-53;
    };
    const int x0 = 7, x1 = 25, y0 = 7, y1 = 25;  // disk bbox, radius 9
    const int bw = x1 - x0 + 1, bh = y1 - y0 + 1;
    ImageU8 want_img = img;
    ImageU8 want_mask = mask;
    for (int gy = 0; gy < 4; ++gy)
      for (int gx = 0; gx < 4; ++gx) {
        const int cy0 = y0 + bh * gy / 4, cy1 = y0 + bh * (gy + 1) / 4;
        const int cx0 = x0 + bw * gx / 4, cx1 = x0 + bw * (gx + 1) / 4;
        bool intersects = false;
        for (int y = cy0; y < cy1 && !intersects; ++y)
          for (int x = cx0; x < cx1; ++x)
            if (mask.at(y, x) > 0) {
              intersects = true;
              break;
            }
        if (!intersects) continue;
        if (uniform() < 0.5) {
          for (int y = cy0; y < cy1; ++y)
            for (int x = cx0; x < cx1; ++x) {
              for (int c = 0; c < 3; ++c)
                want_img.at(y, x, c) = params.fill[c];
              want_mask.at(y, x) = 0;
            }
        }
      }
    CHECK(im.px == want_img.px);
    CHECK(mk.px == want_mask.px);
  }
  SUBCASE("never creates mask pixels") {
    params.p_hide = 0.7;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto [im, mk] = hide_and_seek(img, mask, params, seed);
      for (std::size_t i = 0; i < mask.px.size(); ++i)
        if (mask.px[i] == 0) CHECK(mk.px[i] == 0);
      CHECK(im.h == img.h);
      CHECK(im.w == img.w);
    }
  }
  SUBCASE("hide_mask = false keeps the mask intact") {
    params.p_hide = 1.0;
    params.hide_mask = false;
    auto [im, mk] = hide_and_seek(img, mask, params, 3);
    CHECK(mk.px == mask.px);
    CHECK(im.at(16, 16, 0) == params.fill[0]);
  }
  SUBCASE("empty mask returns the input unchanged") {
    ImageU8 empty(32, 32, 1, 0);
    auto [im, mk] = hide_and_seek(img, empty, params, 3);
    CHECK(im.px == img.px);
    CHECK(mk.px == empty.px);
  }
}

TEST_CASE("synthetic dataset generator") {
  SynthParams params;
  params.n_smoke = 6;
  params.n_background = 6;
  params.size = 32;
  params.seed = 99;
  auto samples = synth_samples(params);
  REQUIRE(samples.size() == 12);

  SUBCASE("smoke masks nonempty, boxes are exact mask bounding rectangles") {
    for (int i = 0; i < 6; ++i) {
      const Sample& s = samples[i];
      CHECK(s.frame_label == 1);
      REQUIRE(!s.mask.empty());
      int x0 = 32, y0 = 32, x1 = -1, y1 = -1;
      int count = 0;
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          if (s.mask.at(y, x) > 0) {
            ++count;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
          }
      CHECK(count > 0);
      REQUIRE(s.boxes.size() == 1);
      CHECK(s.boxes[0].x0 == x0);
      CHECK(s.boxes[0].y0 == y0);
      CHECK(s.boxes[0].x1 == x1 + 1);
      CHECK(s.boxes[0].y1 == y1 + 1);
      CHECK(s.boxes[0].score >= 0.6);
      CHECK(s.boxes[0].score <= 1.0);
    }
  }
  SUBCASE("background samples carry label 0 and no mask") {
    for (int i = 6; i < 12; ++i) {
      CHECK(samples[i].frame_label == 0);
      CHECK(samples[i].mask.empty());
      CHECK(samples[i].boxes.empty());
    }
  }
  SUBCASE("fixed seed is bit-identical across runs") {
    auto again = synth_samples(params);
    REQUIRE(again.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      CHECK(again[i].image.px == samples[i].image.px);
      CHECK(again[i].mask.px == samples[i].mask.px);
    }
  }
  SUBCASE("size must be divisible by 8") {
    params.size = 30;
    CHECK_THROWS_AS(synth_samples(params), std::invalid_argument);
  }
}
