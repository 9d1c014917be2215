// smokesal: salient smoke detection pipeline CLI.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// Failures also emit one machine-readable JSON line on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smoke/augment.hpp"
#include "smoke/checkpoint.hpp"
#include "smoke/compositing.hpp"
#include "smoke/config.hpp"
#include "smoke/dataset.hpp"
#include "smoke/errors.hpp"
#include "smoke/metrics.hpp"
#include "smoke/net.hpp"
#include "smoke/pipeline.hpp"
#include "smoke/png_io.hpp"
#include "smoke/superpixel.hpp"
#include "smoke/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smoke;

namespace {

struct CommonOpts {
  std::string config_path;
  std::int64_t seed = -1;  // -1 = keep the config value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Run config JSON");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << text;
}

std::vector<Sample> load_split(const std::string& dataset_dir,
                               const std::string& split) {
  return load_dataset(
      scan_dataset((fs::path(dataset_dir) / split).string(), split));
}

/// Saliency model rebuilt from a snapshot + its JSON sidecar.
SaliencyNet<double> load_model(const std::string& snapshot_path,
                               std::uint64_t seed) {
  const fs::path side = fs::path(snapshot_path).replace_extension(".json");
  NetConfig net = load_net_sidecar(side.string());
  SaliencyNet<double> model(net, seed);
  load_snapshot(model.params(), snapshot_path);
  return model;
}

// ---------------------------------------------------------------- train --

struct TrainArgs {
  CommonOpts common;
  std::string dataset, out = "out";
  int steps = -1;
};

void cmd_train(const TrainArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  if (!a.dataset.empty()) cfg.dataset_dir = a.dataset;
  if (cfg.dataset_dir.empty())
    throw DataError("train: no dataset directory (use --dataset)");
  cfg.out_dir = a.out;
  const int steps = a.steps >= 0 ? a.steps : cfg.optim.steps;

  auto train = load_split(cfg.dataset_dir, "train");
  SaliencyNet<double> model(cfg.net, cfg.seed);
  TrainOutput result = train_model(model, train, cfg, steps);

  fs::create_directories(cfg.out_dir);
  const std::string prov = provenance_json(cfg);
  save_snapshot(model.params(), (fs::path(cfg.out_dir) / "model.snap").string());
  save_net_sidecar(cfg.net, (fs::path(cfg.out_dir) / "model.json").string(),
                   prov);
  std::ostringstream losses;
  losses << "# provenance: " << prov << "\n";
  losses << "step,loss\n";
  for (const auto& [step, loss] : result.loss_log) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", step, loss);
    losses << buf;
  }
  write_text((fs::path(cfg.out_dir) / "loss.csv").string(), losses.str());
  std::cout << "trained " << steps << " steps on " << train.size()
            << " samples";
  if (steps > 0)
    std::cout << "; loss " << result.initial_loss << " -> "
              << result.final_loss;
  std::cout << "\ncheckpoint: " << (fs::path(cfg.out_dir) / "model.snap").string()
            << "\n";
}

// ---------------------------------------------------------------- infer --

struct InferArgs {
  CommonOpts common;
  std::string checkpoint, dataset, split = "test", out = "out/infer";
};

void cmd_infer(const InferArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  if (!a.dataset.empty()) cfg.dataset_dir = a.dataset;
  auto samples = load_split(cfg.dataset_dir, a.split);
  SaliencyNet<double> model = load_model(a.checkpoint, cfg.seed);
  cfg.net = model.config();

  fs::create_directories(fs::path(a.out) / "saliency");
  const std::string prov = provenance_json(cfg);
  json existence = json::array();
  const int bs = std::max(1, cfg.optim.batch_size);
  for (std::size_t start = 0; start < samples.size(); start += bs) {
    std::vector<int> idx;
    for (std::size_t i = start; i < std::min(samples.size(), start + bs);
         ++i)
      idx.push_back(static_cast<int>(i));
    TrainBatch<double> batch = make_batch(samples, idx, cfg);
    InferOutputs<double> inf = model.infer(batch);
    for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
      const Sample& s = samples[idx[i]];
      ImageF mf(cfg.net.input_h, cfg.net.input_w, 1);
      for (int y = 0; y < mf.h; ++y)
        for (int x = 0; x < mf.w; ++x)
          mf.at(y, x) = inf.final_map.at(i, 0, y, x);
      write_png((fs::path(a.out) / "saliency" / (s.id + ".png")).string(),
                to_u8(mf), prov);
      existence.push_back(
          {{"image_id", s.id},
           {"existence_probability", inf.existence_prob[i]}});
    }
  }
  json out{{"provenance", json::parse(prov)}, {"images", existence}};
  write_text((fs::path(a.out) / "existence.json").string(),
             out.dump(2) + "\n");
  std::cout << "wrote " << samples.size() << " saliency maps to " << a.out
            << "\n";
}

// ----------------------------------------------------------------- fuse --

struct FuseArgs {
  CommonOpts common;
  std::string checkpoint, pixel_dir, object_dir, out;
};

void cmd_fuse(const FuseArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  SaliencyNet<double> model = load_model(a.checkpoint, cfg.seed);
  if (!model.config().fusion_enabled())
    throw DataError("fuse: the checkpoint has no fusion layer");
  fs::create_directories(a.out);
  const std::string prov = provenance_json(cfg);
  Tape<double> tape;
  tape.set_recording(false);
  int count = 0;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.pixel_dir))
    if (entry.path().extension() == ".png") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    const std::string id = p.stem().string();
    const fs::path op = fs::path(a.object_dir) / (id + ".png");
    if (!fs::exists(op))
      throw DataError("fuse: no object map for '" + id + "' in " +
                      a.object_dir);
    ImageU8 pixel = read_png(p.string());
    ImageU8 object = read_png(op.string());
    if (pixel.ch != 1 || object.ch != 1 || pixel.h != object.h ||
        pixel.w != object.w)
      throw DataError("fuse: map mismatch for '" + id + "'");
    Tensor<double> pm({1, 1, pixel.h, pixel.w});
    Tensor<double> om({1, 1, pixel.h, pixel.w});
    for (int y = 0; y < pixel.h; ++y)
      for (int x = 0; x < pixel.w; ++x) {
        pm.at(0, 0, y, x) = pixel.at(y, x) / 255.0;
        om.at(0, 0, y, x) = object.at(y, x) / 255.0;
      }
    Tensor<double> fused = model.fuse(tape, {pm, om});
    ImageF mf(pixel.h, pixel.w, 1);
    for (int y = 0; y < pixel.h; ++y)
      for (int x = 0; x < pixel.w; ++x) mf.at(y, x) = fused.at(0, 0, y, x);
    write_png((fs::path(a.out) / (id + ".png")).string(), to_u8(mf), prov);
    ++count;
  }
  std::cout << "fused " << count << " map pairs into " << a.out << "\n";
}

// ----------------------------------------------------------- objectness --

struct ObjectnessArgs {
  CommonOpts common;
  std::string dataset, split = "test", out = "out/objectness";
  std::string boxes_file, out_file;
  int width = 0, height = 0;
  double lambda = -1.0;
};

void cmd_objectness(const ObjectnessArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  if (a.lambda >= 0) cfg.objectness.lambda = a.lambda;
  const std::string prov = provenance_json(cfg);
  if (!a.boxes_file.empty()) {
    if (a.width <= 0 || a.height <= 0)
      throw DataError("objectness: --boxes needs --width and --height");
    auto boxes = read_boxes_json(a.boxes_file);
    ImageU8 heat = normalize_u8(
        objectness_map(boxes, a.height, a.width, cfg.objectness));
    const std::string out =
        a.out_file.empty() ? "objectness.png" : a.out_file;
    write_png(out, heat, prov);
    std::cout << "wrote " << out << "\n";
    return;
  }
  if (!a.dataset.empty()) cfg.dataset_dir = a.dataset;
  auto samples = load_split(cfg.dataset_dir, a.split);
  fs::create_directories(a.out);
  for (const Sample& s : samples) {
    ImageU8 heat =
        s.boxes.empty()
            ? ImageU8(s.image.h, s.image.w, 1, 0)
            : normalize_u8(objectness_map(s.boxes, s.image.h, s.image.w,
                                          cfg.objectness));
    write_png((fs::path(a.out) / (s.id + ".png")).string(), heat, prov);
  }
  std::cout << "wrote " << samples.size() << " heatmaps to " << a.out
            << "\n";
}

// ----------------------------------------------------------------- slic --

struct SlicArgs {
  CommonOpts common;
  std::string image, out = "labels.png", render_out, mask;
  int k = -1, iters = -1;
  double m = -1;
};

void cmd_slic(const SlicArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  if (a.k > 0) cfg.slic.superpixels = a.k;
  if (a.m > 0) cfg.slic.compactness = a.m;
  if (a.iters > 0) cfg.slic.iterations = a.iters;
  ImageU8 img = read_png(a.image);
  LabelMap labels = slic(img, cfg.slic.superpixels, cfg.slic.compactness,
                         cfg.slic.iterations);
  std::vector<std::uint16_t> px(labels.labels.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<std::uint16_t>(labels.labels[i]);
  write_png16(a.out, px, labels.h, labels.w, provenance_json(cfg));
  std::cout << labels.num_labels << " superpixels -> " << a.out << "\n";
  if (!a.render_out.empty()) {
    if (a.mask.empty())
      throw DataError("slic: --render needs --mask");
    ImageU8 mask = read_png(a.mask);
    if (mask.ch != 1) mask = to_gray(mask);
    write_png(a.render_out, render_fig3(labels, mask, img),
              provenance_json(cfg));
    std::cout << "rendered overlay -> " << a.render_out << "\n";
  }
}

// -------------------------------------------------------------- augment --

struct AugmentArgs {
  CommonOpts common;
  std::string mode, dataset, split = "train", out;
  std::string blend = "alpha";
  int train_smoke = 128, train_bg = 128, test_smoke = 32, test_bg = 32;
  int size = 64;
};

void write_provenance_file(const std::string& dir, const RunConfig& cfg,
                           const json& extra) {
  json j = json::parse(provenance_json(cfg));
  j.update(extra);
  write_text((fs::path(dir) / "provenance.json").string(), j.dump(2) + "\n");
}

void cmd_augment(const AugmentArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  if (a.out.empty()) throw DataError("augment: --out is required");
  const std::string prov = provenance_json(cfg);

  if (a.mode == "synth") {
    SynthParams train;
    train.n_smoke = a.train_smoke;
    train.n_background = a.train_bg;
    train.size = a.size;
    train.seed = cfg.seed;
    SynthParams test = train;
    test.n_smoke = a.test_smoke;
    test.n_background = a.test_bg;
    test.seed = cfg.seed + 1;
    synth_dataset((fs::path(a.out) / "train").string(), train, prov);
    synth_dataset((fs::path(a.out) / "test").string(), test, prov);
    write_provenance_file(a.out, cfg,
                          {{"mode", "synth"},
                           {"size", a.size},
                           {"train_smoke", a.train_smoke},
                           {"train_background", a.train_bg},
                           {"test_smoke", a.test_smoke},
                           {"test_background", a.test_bg}});
    std::cout << "synthetic dataset written to " << a.out << "\n";
    return;
  }

  if (!a.dataset.empty()) cfg.dataset_dir = a.dataset;
  auto samples = load_split(cfg.dataset_dir, a.split);

  if (a.mode == "hideseek") {
    std::vector<Sample> out_samples;
    json sources = json::array();
    Rng seeder(cfg.seed);
    for (const Sample& s : samples) {
      Sample ns = s;
      if (s.frame_label == 1 && !s.mask.empty()) {
        const std::uint64_t sample_seed = seeder.next_u64();
        auto [img, mask] =
            hide_and_seek(s.image, s.mask, cfg.hide_seek, sample_seed);
        ns.image = std::move(img);
        ns.mask = std::move(mask);
        ns.id = s.id + "_hs";
        bool any = false;
        for (auto v : ns.mask.px) any = any || v;
        if (!any) ns.mask = ImageU8{};  // fully occluded -> background
        if (ns.mask.empty()) {
          ns.frame_label = 0;
          ns.boxes.clear();
        }
        sources.push_back({{"source", s.id},
                           {"output", ns.id},
                           {"seed", sample_seed}});
      }
      out_samples.push_back(std::move(ns));
    }
    write_dataset((fs::path(a.out) / a.split).string(), out_samples, prov);
    write_provenance_file(
        a.out, cfg,
        {{"mode", "hideseek"},
         {"grid", {cfg.hide_seek.grid_x, cfg.hide_seek.grid_y}},
         {"p_hide", cfg.hide_seek.p_hide},
         {"sources", sources}});
    std::cout << "hide-and-seek dataset written to " << a.out << "\n";
    return;
  }

  if (a.mode == "composite") {
    std::vector<const Sample*> smoke, backgrounds;
    for (const Sample& s : samples)
      (s.frame_label == 1 ? smoke : backgrounds).push_back(&s);
    if (smoke.empty() || backgrounds.empty())
      throw DataError("augment composite: need smoke and background samples");
    Rng rng(cfg.seed);
    std::vector<Sample> out_samples;
    json sources = json::array();
    for (const Sample* sp : smoke) {
      const Sample& src = *sp;
      const Sample& bg =
          *backgrounds[rng.uniform_int(0, static_cast<int>(backgrounds.size()) - 1)];
      if (bg.image.h != src.image.h || bg.image.w != src.image.w)
        throw DataError("augment composite: size mismatch between '" +
                        src.id + "' and '" + bg.id + "'");
      // Keep one pixel of margin so the Poisson stencil stays in bounds.
      ImageU8 region(src.mask.h, src.mask.w, 1, 0);
      for (int y = 1; y < src.mask.h - 1; ++y)
        for (int x = 1; x < src.mask.w - 1; ++x)
          region.at(y, x) = src.mask.at(y, x);
      bool any = false;
      for (auto v : region.px) any = any || v;
      if (!any) continue;

      CompositeJob job;
      job.source = src.image;
      job.source_mask = region;
      job.target = bg.image;
      job.tol = cfg.poisson_tol;
      job.max_iters = cfg.poisson_max_iters;
      ImageF composite;
      if (a.blend == "poisson") {
        composite = composite_poisson(job).image;
      } else if (a.blend == "alpha") {
        ImageF alpha(src.image.h, src.image.w, 1, 0.0);
        for (int y = 0; y < region.h; ++y)
          for (int x = 0; x < region.w; ++x)
            if (region.at(y, x) > 0) alpha.at(y, x) = 0.85;
        composite = composite_alpha(job, alpha);
      } else {
        throw DataError("augment composite: unknown blend '" + a.blend +
                        "'");
      }
      Sample ns;
      ns.id = src.id + "_on_" + bg.id;
      ns.image = to_u8(composite);
      ns.mask = region;
      ns.frame_label = 1;
      int bx0 = region.w, by0 = region.h, bx1 = -1, by1 = -1;
      for (int y = 0; y < region.h; ++y)
        for (int x = 0; x < region.w; ++x)
          if (region.at(y, x) > 0) {
            bx0 = std::min(bx0, x);
            by0 = std::min(by0, y);
            bx1 = std::max(bx1, x);
            by1 = std::max(by1, y);
          }
      BBox box;
      box.x0 = bx0;
      box.y0 = by0;
      box.x1 = bx1 + 1;
      box.y1 = by1 + 1;
      box.score = src.boxes.empty() ? 0.9 : src.boxes[0].score;
      ns.boxes.push_back(box);
      out_samples.push_back(std::move(ns));
      sources.push_back({{"source", src.id}, {"background", bg.id}});
    }
    write_dataset((fs::path(a.out) / a.split).string(), out_samples, prov);
    write_provenance_file(a.out, cfg,
                          {{"mode", "composite"},
                           {"blend", a.blend},
                           {"sources", sources}});
    std::cout << "composite dataset (" << out_samples.size()
              << " samples) written to " << a.out << "\n";
    return;
  }
  throw DataError("augment: unknown mode '" + a.mode +
                  "' (synth|hideseek|composite)");
}

// ----------------------------------------------------------------- eval --

struct EvalArgs {
  CommonOpts common;
  std::string checkpoint, maps_dir, existence_file;
  std::string dataset, split = "test", out = "out/eval";
};

void cmd_eval(const EvalArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  if (!a.dataset.empty()) cfg.dataset_dir = a.dataset;
  auto samples = load_split(cfg.dataset_dir, a.split);
  fs::create_directories(a.out);

  EvalOutput result;
  if (!a.checkpoint.empty()) {
    SaliencyNet<double> model = load_model(a.checkpoint, cfg.seed);
    cfg.net = model.config();
    result = evaluate_model(model, samples, cfg);
  } else if (!a.maps_dir.empty()) {
    // Metrics over precomputed maps.
    std::vector<ImageU8> maps, gts;
    json existence;
    if (!a.existence_file.empty()) {
      std::ifstream is(a.existence_file);
      if (!is) throw DataError("cannot open " + a.existence_file);
      is >> existence;
    }
    for (const Sample& s : samples) {
      const fs::path mp = fs::path(a.maps_dir) / (s.id + ".png");
      if (!fs::exists(mp))
        throw DataError("eval: missing map for '" + s.id + "' in " +
                        a.maps_dir);
      ImageU8 map = read_png(mp.string());
      if (map.ch != 1) map = to_gray(map);
      if (map.h != s.image.h || map.w != s.image.w)
        throw DataError("eval: map size mismatch for '" + s.id + "'");

      PerImageEval pe;
      pe.id = s.id;
      pe.frame_label = s.frame_label;
      pe.threshold = adaptive_threshold_u8(map);
      pe.has_mask = !s.mask.empty();
      ImageU8 seg(map.h, map.w, 1, 0);
      for (int y = 0; y < map.h; ++y)
        for (int x = 0; x < map.w; ++x)
          if (map.at(y, x) > pe.threshold) seg.at(y, x) = 255;
      if (pe.has_mask) {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < map.px.size(); ++i) {
          const bool pred = seg.px[i] > 0;
          const bool pos = s.mask.px[i] > 0;
          tp += pred && pos;
          fp += pred && !pos;
          fn += !pred && pos;
        }
        const double prec = tp + fp == 0 ? 0.0 : double(tp) / (tp + fp);
        const double rec = tp + fn == 0 ? 0.0 : double(tp) / (tp + fn);
        pe.f_adaptive = f_measure(prec, rec);
        pe.overlap_adaptive = overlap(seg, s.mask);
      }
      if (existence.contains("images")) {
        for (const auto& e : existence["images"])
          if (e["image_id"] == s.id)
            pe.existence_prob = e["existence_probability"].get<double>();
      }
      result.per_image.push_back(pe);
      gts.push_back(pe.has_mask ? s.mask : ImageU8(map.h, map.w, 1, 0));
      maps.push_back(std::move(map));
    }
    result.curve = pr_curve(maps, gts);
    int masked = 0, correct = 0;
    double fsum = 0, osum = 0;
    for (const auto& pe : result.per_image) {
      if (pe.has_mask) {
        ++masked;
        fsum += pe.f_adaptive;
        osum += pe.overlap_adaptive;
      }
      correct += (pe.existence_prob > 0.5) == (pe.frame_label == 1);
    }
    result.mean_f_adaptive = masked ? fsum / masked : 0.0;
    result.mean_overlap = masked ? osum / masked : 0.0;
    result.existence_accuracy =
        static_cast<double>(correct) / result.per_image.size();
  } else {
    throw DataError("eval: need --checkpoint or --maps");
  }

  const std::string prov = provenance_json(cfg);
  write_text((fs::path(a.out) / "metrics.json").string(),
             metrics_to_json(result, prov) + "\n");
  write_text((fs::path(a.out) / "pr_curve.csv").string(),
             pr_curve_to_csv(result.curve, prov));
  std::cout << "F(adaptive) " << result.mean_f_adaptive
            << ", existence accuracy " << result.existence_accuracy
            << ", mean overlap " << result.mean_overlap << "\n";
  std::cout << "metrics: " << (fs::path(a.out) / "metrics.json").string()
            << "\n";
}

// ---------------------------------------------------------------- stats --

struct StatsArgs {
  CommonOpts common;
  std::string dataset, split = "test", maps_dir, out = "out/stats";
};

void cmd_stats(const StatsArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  if (!a.dataset.empty()) cfg.dataset_dir = a.dataset;
  auto samples = load_split(cfg.dataset_dir, a.split);
  fs::create_directories(a.out);
  json per = json::array();
  std::ostringstream csv;
  csv << "# provenance: " << provenance_json(cfg) << "\n";
  csv << "id,hist_contrast,size_ratio,thickness,dispersion,overlap\n";
  for (const Sample& s : samples) {
    if (s.frame_label != 1 || s.mask.empty()) continue;
    ImageStatsResult st = image_stats(s.image, s.mask);
    json j{{"id", s.id},
           {"hist_contrast", st.hist_contrast},
           {"size_ratio", st.size_ratio},
           {"thickness", st.thickness},
           {"dispersion", st.dispersion}};
    double ov = -1.0;
    if (!a.maps_dir.empty()) {
      const fs::path mp = fs::path(a.maps_dir) / (s.id + ".png");
      if (!fs::exists(mp))
        throw DataError("stats: missing map for '" + s.id + "'");
      ImageU8 map = read_png(mp.string());
      if (map.ch != 1) map = to_gray(map);
      const double t = adaptive_threshold_u8(map);
      ImageU8 seg(map.h, map.w, 1, 0);
      for (std::size_t i = 0; i < map.px.size(); ++i)
        if (map.px[i] > t) seg.px[i] = 255;
      ov = overlap(seg, s.mask);
      j["overlap"] = ov;
    }
    per.push_back(j);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                  s.id.c_str(), st.hist_contrast, st.size_ratio,
                  st.thickness, st.dispersion, ov);
    csv << buf;
  }
  json out{{"provenance", json::parse(provenance_json(cfg))},
           {"per_image", per}};
  write_text((fs::path(a.out) / "stats.json").string(), out.dump(2) + "\n");
  write_text((fs::path(a.out) / "stats.csv").string(), csv.str());
  std::cout << "stats for " << per.size() << " smoke images -> " << a.out
            << "\n";
}

// ---------------------------------------------------------------- bench --

struct BenchArgs {
  CommonOpts common;
  std::string out = "out/bench";
  int images = 10, width = 256, height = 192;
};

void cmd_bench(const BenchArgs& a) {
  RunConfig cfg = resolve_config(a.common);
  auto stages = run_bench(cfg, a.images, a.height, a.width);
  const std::string table = bench_to_text(stages, a.images, a.height, a.width);
  std::cout << table;
  fs::create_directories(a.out);
  json js = json::array();
  for (const auto& s : stages)
    js.push_back({{"stage", s.name}, {"mean_seconds", s.mean_seconds}});
  json out{{"provenance", json::parse(provenance_json(cfg))},
           {"images", a.images},
           {"width", a.width},
           {"height", a.height},
           {"stages", js}};
  write_text((fs::path(a.out) / "bench.json").string(), out.dump(2) + "\n");
  write_text((fs::path(a.out) / "bench.txt").string(), table);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smokesal: salient smoke detection pipeline"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train the saliency network");
  add_common(train, train_args.common);
  train->add_option("--dataset", train_args.dataset, "Dataset root");
  train->add_option("--out", train_args.out, "Output directory");
  train->add_option("--steps", train_args.steps, "Override step count");

  InferArgs infer_args;
  auto* infer = app.add_subcommand(
      "infer", "Write saliency maps and existence probabilities");
  add_common(infer, infer_args.common);
  infer->add_option("--checkpoint", infer_args.checkpoint, "model.snap")
      ->required();
  infer->add_option("--dataset", infer_args.dataset, "Dataset root");
  infer->add_option("--split", infer_args.split, "Dataset split");
  infer->add_option("--out", infer_args.out, "Output directory");

  FuseArgs fuse_args;
  auto* fuse = app.add_subcommand("fuse",
                                  "Fuse pixel and object map directories");
  add_common(fuse, fuse_args.common);
  fuse->add_option("--checkpoint", fuse_args.checkpoint, "model.snap")
      ->required();
  fuse->add_option("--pixel", fuse_args.pixel_dir, "Pixel map directory")
      ->required();
  fuse->add_option("--object", fuse_args.object_dir, "Object map directory")
      ->required();
  fuse->add_option("--out", fuse_args.out, "Output directory")->required();

  ObjectnessArgs obj_args;
  auto* obj = app.add_subcommand("objectness",
                                 "Objectness heatmaps from scored boxes");
  add_common(obj, obj_args.common);
  obj->add_option("--dataset", obj_args.dataset, "Dataset root");
  obj->add_option("--split", obj_args.split, "Dataset split");
  obj->add_option("--out", obj_args.out, "Output directory");
  obj->add_option("--boxes", obj_args.boxes_file, "Single boxes JSON");
  obj->add_option("--width", obj_args.width, "Map width for --boxes");
  obj->add_option("--height", obj_args.height, "Map height for --boxes");
  obj->add_option("--out-file", obj_args.out_file, "Output for --boxes");
  obj->add_option("--lambda", obj_args.lambda, "Distance decay rate");

  SlicArgs slic_args;
  auto* slic_cmd =
      app.add_subcommand("slic", "SLIC superpixel segmentation");
  add_common(slic_cmd, slic_args.common);
  slic_cmd->add_option("--image", slic_args.image, "Input PNG")->required();
  slic_cmd->add_option("--out", slic_args.out, "16-bit label map PNG");
  slic_cmd->add_option("--k", slic_args.k, "Superpixel count");
  slic_cmd->add_option("--m", slic_args.m, "Compactness");
  slic_cmd->add_option("--iters", slic_args.iters, "Iterations");
  slic_cmd->add_option("--render", slic_args.render_out,
                       "Overlay rendering output PNG");
  slic_cmd->add_option("--mask", slic_args.mask,
                       "Smoke mask for the overlay rendering");

  AugmentArgs aug_args;
  auto* aug = app.add_subcommand(
      "augment", "Dataset generation and augmentation");
  add_common(aug, aug_args.common);
  aug->add_option("--mode", aug_args.mode, "synth|hideseek|composite")
      ->required();
  aug->add_option("--dataset", aug_args.dataset, "Source dataset root");
  aug->add_option("--split", aug_args.split, "Source split");
  aug->add_option("--out", aug_args.out, "Output dataset root")->required();
  aug->add_option("--blend", aug_args.blend, "composite blend: poisson|alpha");
  aug->add_option("--train-smoke", aug_args.train_smoke, "synth: train smoke");
  aug->add_option("--train-bg", aug_args.train_bg, "synth: train background");
  aug->add_option("--test-smoke", aug_args.test_smoke, "synth: test smoke");
  aug->add_option("--test-bg", aug_args.test_bg, "synth: test background");
  aug->add_option("--size", aug_args.size, "synth: image size");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Metrics over a dataset split");
  add_common(eval, eval_args.common);
  eval->add_option("--checkpoint", eval_args.checkpoint,
                   "Evaluate this model directly");
  eval->add_option("--maps", eval_args.maps_dir,
                   "Evaluate precomputed saliency maps");
  eval->add_option("--existence", eval_args.existence_file,
                   "existence.json for --maps mode");
  eval->add_option("--dataset", eval_args.dataset, "Dataset root");
  eval->add_option("--split", eval_args.split, "Dataset split");
  eval->add_option("--out", eval_args.out, "Output directory");

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Per-image smoke statistics");
  add_common(stats, stats_args.common);
  stats->add_option("--dataset", stats_args.dataset, "Dataset root");
  stats->add_option("--split", stats_args.split, "Dataset split");
  stats->add_option("--maps", stats_args.maps_dir,
                    "Saliency maps for overlap analysis");
  stats->add_option("--out", stats_args.out, "Output directory");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Per-stage timing table");
  add_common(bench, bench_args.common);
  bench->add_option("--out", bench_args.out, "Output directory");
  bench->add_option("--images", bench_args.images, "Image count");
  bench->add_option("--width", bench_args.width, "Image width");
  bench->add_option("--height", bench_args.height, "Image height");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    json err{{"error", {{"code", 1}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }

  try {
    if (*train) cmd_train(train_args);
    if (*infer) cmd_infer(infer_args);
    if (*fuse) cmd_fuse(fuse_args);
    if (*obj) cmd_objectness(obj_args);
    if (*slic_cmd) cmd_slic(slic_args);
    if (*aug) cmd_augment(aug_args);
    if (*eval) cmd_eval(eval_args);
    if (*stats) cmd_stats(stats_args);
    if (*bench) cmd_bench(bench_args);
  } catch (const NumericError& e) {
    json err{{"error", {{"code", 3}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 3;
  } catch (const std::domain_error& e) {
    json err{{"error", {{"code", 3}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 3;
  } catch (const std::exception& e) {
    json err{{"error", {{"code", 2}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}
