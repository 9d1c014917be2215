#include "smoke/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "smoke/errors.hpp"
#include "smoke/rng.hpp"
#include "smoke/superpixel.hpp"

using nlohmann::json;

namespace smoke {

namespace {

Tensor<double> image_tensor(const std::vector<Sample>& samples,
                            const std::vector<int>& indices, int h, int w) {
  const int n = static_cast<int>(indices.size());
  Tensor<double> t({n, 3, h, w});
  for (int i = 0; i < n; ++i) {
    const ImageU8& img = samples[indices[i]].image;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          t.at(i, c, y, x) = img.at(y, x, c) / 255.0;
  }
  return t;
}

LabelMap slic_for(const Sample& s, const RunConfig& cfg) {
  return slic(s.image, cfg.slic.superpixels, cfg.slic.compactness,
              cfg.slic.iterations);
}

/// Detached pixel maps -> superpixel means. The region branch is a
/// stand-in fed as data, so no gradient flows back through it.
Tensor<double> region_map_tensor(const SaliencyNet<double>& model,
                                 const std::vector<Sample>& samples,
                                 const std::vector<int>& indices,
                                 const RunConfig& cfg,
                                 const Tensor<double>& images) {
  Tape<double> tape;
  tape.set_recording(false);
  EncoderFeatures<double> f = model.encode(tape, images);
  DecoderOutputs<double> d = model.decode(tape, f);
  const int h = images.shape().h, w = images.shape().w;
  Tensor<double> out({static_cast<int>(indices.size()), 1, h, w});
  for (int i = 0; i < static_cast<int>(indices.size()); ++i) {
    ImageF pm(h, w, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) pm.at(y, x) = d.pixel_map.at(i, 0, y, x);
    ImageF rm = region_saliency(slic_for(samples[indices[i]], cfg), pm);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(i, 0, y, x) = rm.at(y, x);
  }
  return out;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(0, i)]);
}

}  // namespace

TrainBatch<double> make_batch(const std::vector<Sample>& samples,
                              const std::vector<int>& indices,
                              const RunConfig& cfg) {
  const int h = cfg.net.input_h, w = cfg.net.input_w;
  for (int i : indices) {
    const Sample& s = samples[i];
    if (s.image.h != h || s.image.w != w)
      throw DataError("sample '" + s.id + "' is " +
                      std::to_string(s.image.w) + "x" +
                      std::to_string(s.image.h) + ", the model expects " +
                      std::to_string(w) + "x" + std::to_string(h));
  }
  TrainBatch<double> b;
  const int n = static_cast<int>(indices.size());
  b.images = image_tensor(samples, indices, h, w);
  b.masks = Tensor<double>({n, 1, h, w});
  b.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const Sample& s = samples[indices[i]];
    b.labels[i] = s.frame_label;
    if (!s.mask.empty())
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          b.masks.at(i, 0, y, x) = s.mask.at(y, x) > 0 ? 1.0 : 0.0;
  }
  if (cfg.net.fuse_object) {
    b.object_maps = Tensor<double>({n, 1, h, w});
    for (int i = 0; i < n; ++i) {
      const Sample& s = samples[indices[i]];
      if (s.boxes.empty()) continue;  // zero map
      ImageF om = objectness_feature(s.boxes, h, w, cfg.objectness);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          b.object_maps.at(i, 0, y, x) = om.at(y, x);
    }
  }
  return b;
}

TrainOutput train_model(SaliencyNet<double>& model,
                        const std::vector<Sample>& train,
                        const RunConfig& cfg, int steps) {
  if (train.empty()) throw DataError("train_model: empty training set");
  TrainOutput out;
  model.set_head_lr_multiplier(cfg.optim.head_lr_mult);
  Rng shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ull + 1);
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_indices(order, shuffle_rng);
  std::size_t cursor = 0;
  const int bs = std::min<int>(cfg.optim.batch_size,
                               static_cast<int>(train.size()));
  for (int step = 0; step < steps; ++step) {
    std::vector<int> idx;
    idx.reserve(bs);
    while (static_cast<int>(idx.size()) < bs) {
      if (cursor == order.size()) {
        shuffle_indices(order, shuffle_rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    TrainBatch<double> batch = make_batch(train, idx, cfg);
    if (cfg.net.fuse_region)
      batch.region_maps =
          region_map_tensor(model, train, idx, cfg, batch.images);
    const double loss = model.train_step(
        batch, cfg.optim.lr, cfg.optim.momentum);
    out.loss_log.emplace_back(step, loss);
  }
  if (!out.loss_log.empty()) {
    out.initial_loss = out.loss_log.front().second;
    const int tail = std::min<std::size_t>(10, out.loss_log.size());
    double acc = 0;
    for (int i = 0; i < tail; ++i)
      acc += out.loss_log[out.loss_log.size() - 1 - i].second;
    out.final_loss = acc / tail;
  }
  return out;
}

EvalOutput evaluate_model(const SaliencyNet<double>& model,
                          const std::vector<Sample>& samples,
                          const RunConfig& cfg,
                          std::vector<ImageU8>* maps_out) {
  if (samples.empty()) throw DataError("evaluate_model: empty split");
  EvalOutput out;
  const int h = cfg.net.input_h, w = cfg.net.input_w;
  const int bs = std::max(1, cfg.optim.batch_size);
  std::vector<ImageU8> maps, gts;
  maps.reserve(samples.size());

  for (std::size_t start = 0; start < samples.size(); start += bs) {
    std::vector<int> idx;
    for (std::size_t i = start; i < std::min(samples.size(), start + bs); ++i)
      idx.push_back(static_cast<int>(i));
    TrainBatch<double> batch = make_batch(samples, idx, cfg);
    if (cfg.net.fuse_region)
      batch.region_maps =
          region_map_tensor(model, samples, idx, cfg, batch.images);
    InferOutputs<double> inf = model.infer(batch);
    for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
      const Sample& s = samples[idx[i]];
      ImageF mf(h, w, 1);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          mf.at(y, x) = inf.final_map.at(i, 0, y, x);
      ImageU8 map8 = to_u8(mf);

      PerImageEval pe;
      pe.id = s.id;
      pe.frame_label = s.frame_label;
      pe.existence_prob = inf.existence_prob[i];
      pe.threshold = adaptive_threshold_u8(map8);
      pe.has_mask = !s.mask.empty();

      ImageU8 seg(h, w, 1, 0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (map8.at(y, x) > pe.threshold) seg.at(y, x) = 255;
      if (pe.has_mask) {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const bool pred = seg.at(y, x) > 0;
            const bool pos = s.mask.at(y, x) > 0;
            tp += pred && pos;
            fp += pred && !pos;
            fn += !pred && pos;
          }
        const double prec = tp + fp == 0 ? 0.0 : double(tp) / (tp + fp);
        const double rec = tp + fn == 0 ? 0.0 : double(tp) / (tp + fn);
        pe.f_adaptive = f_measure(prec, rec);
        pe.overlap_adaptive = overlap(seg, s.mask);
      }
      out.per_image.push_back(pe);

      gts.push_back(pe.has_mask ? s.mask : ImageU8(h, w, 1, 0));
      maps.push_back(std::move(map8));
    }
  }

  out.curve = pr_curve(maps, gts);
  int masked = 0, correct = 0;
  double fsum = 0, osum = 0;
  for (const PerImageEval& pe : out.per_image) {
    if (pe.has_mask) {
      ++masked;
      fsum += pe.f_adaptive;
      osum += pe.overlap_adaptive;
    }
    correct += (pe.existence_prob > 0.5) == (pe.frame_label == 1);
  }
  out.mean_f_adaptive = masked ? fsum / masked : 0.0;
  out.mean_overlap = masked ? osum / masked : 0.0;
  out.existence_accuracy =
      static_cast<double>(correct) / static_cast<double>(out.per_image.size());
  if (maps_out) *maps_out = std::move(maps);
  return out;
}

std::string metrics_to_json(const EvalOutput& eval,
                            const std::string& provenance) {
  json per = json::array();
  for (const PerImageEval& pe : eval.per_image) {
    json j{{"id", pe.id},
           {"frame_label", pe.frame_label},
           {"existence_prob", pe.existence_prob},
           {"adaptive_threshold", pe.threshold}};
    if (pe.has_mask) {
      j["f_adaptive"] = pe.f_adaptive;
      j["overlap"] = pe.overlap_adaptive;
    }
    per.push_back(j);
  }
  json j{{"provenance", json::parse(provenance)},
         {"aggregate",
          {{"mean_f_adaptive", eval.mean_f_adaptive},
           {"mean_overlap", eval.mean_overlap},
           {"existence_accuracy", eval.existence_accuracy},
           {"images", eval.per_image.size()}}},
         {"per_image", per}};
  return j.dump(2);
}

std::string pr_curve_to_csv(const PRCurve& curve,
                            const std::string& provenance) {
  std::ostringstream os;
  os << "# provenance: " << provenance << "\n";
  os << "threshold,precision,recall\n";
  for (const PRPoint& p : curve.points) {
    os << p.threshold << ",";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", p.precision, p.recall);
    os << buf << "\n";
  }
  return os.str();
}

namespace {

ImageU8 bench_image(int h, int w, Rng& rng) {
  const int grid = 6;
  std::vector<double> lattice(3 * grid * grid);
  for (auto& v : lattice) v = rng.uniform(0.0, 255.0);
  ImageU8 img(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) / h * (grid - 1);
      const double fx = static_cast<double>(x) / w * (grid - 1);
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
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  return img;
}

}  // namespace

std::vector<BenchStage> run_bench(const RunConfig& cfg, int n_images, int h,
                                  int w) {
  using clock = std::chrono::steady_clock;
  RunConfig bcfg = cfg;
  bcfg.net.input_h = h;
  bcfg.net.input_w = w;
  bcfg.net.fuse_object = true;  // the fusion stage needs the fusion layer
  SaliencyNet<double> model(bcfg.net, bcfg.seed);
  Rng rng(bcfg.seed + 17);

  double t_slic = 0, t_obj = 0, t_fwd = 0, t_fuse = 0;
  for (int i = 0; i < n_images; ++i) {
    ImageU8 img = bench_image(h, w, rng);
    std::vector<BBox> boxes;
    for (int k = 0; k < 2; ++k) {
      BBox b;
      b.x0 = rng.uniform_int(0, w / 2);
      b.y0 = rng.uniform_int(0, h / 2);
      b.x1 = b.x0 + rng.uniform_int(8, w / 2 - 1);
      b.y1 = b.y0 + rng.uniform_int(8, h / 2 - 1);
      b.score = rng.uniform(0.3, 1.0);
      boxes.push_back(b);
    }

    auto t0 = clock::now();
    LabelMap labels = slic(img, bcfg.slic.superpixels, bcfg.slic.compactness,
                           bcfg.slic.iterations);
    auto t1 = clock::now();
    ImageF omap = objectness_map(boxes, h, w, bcfg.objectness);
    auto t2 = clock::now();

    Tape<double> tape;
    tape.set_recording(false);
    Tensor<double> x({1, 3, h, w});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          x.at(0, c, y, xx) = img.at(y, xx, c) / 255.0;
    auto t3 = clock::now();
    EncoderFeatures<double> f = model.encode(tape, x);
    DecoderOutputs<double> d = model.decode(tape, f);
    auto t4 = clock::now();

    ImageU8 onorm = normalize_u8(omap);
    Tensor<double> ot({1, 1, h, w});
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        ot.at(0, 0, y, xx) = onorm.at(y, xx) / 255.0;
    auto t5 = clock::now();
    Tensor<double> fused = model.fuse(tape, {d.pixel_map, ot});
    auto t6 = clock::now();

    (void)labels;
    (void)fused;
    t_slic += std::chrono::duration<double>(t1 - t0).count();
    t_obj += std::chrono::duration<double>(t2 - t1).count();
    t_fwd += std::chrono::duration<double>(t4 - t3).count();
    t_fuse += std::chrono::duration<double>(t6 - t5).count();
  }
  const double inv = 1.0 / n_images;
  return {{"SLIC", t_slic * inv},
          {"objectness", t_obj * inv},
          {"pixel_forward", t_fwd * inv},
          {"fusion", t_fuse * inv}};
}

std::string bench_to_text(const std::vector<BenchStage>& stages,
                          int n_images, int h, int w) {
  std::ostringstream os;
  os << "stage timing over " << n_images << " images at " << w << "x" << h
     << "\n";
  os << "stage            mean_seconds\n";
  for (const BenchStage& s : stages) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s %.6f\n", s.name.c_str(),
                  s.mean_seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace smoke
