#pragma once

#include <string>
#include <vector>

#include "smoke/config.hpp"
#include "smoke/dataset.hpp"
#include "smoke/metrics.hpp"
#include "smoke/net.hpp"

namespace smoke {

/// Builds a training batch from the listed samples: images to [0,1]
/// tensors, masks to {0,1}, and object maps from the ground-truth boxes via
/// the objectness pipeline when the model fuses them. Region maps, when
/// fused, are superpixel means of a detached copy of the current pixel map
/// and are built inside the train/eval loops instead.
TrainBatch<double> make_batch(const std::vector<Sample>& samples,
                              const std::vector<int>& indices,
                              const RunConfig& cfg);

struct TrainOutput {
  std::vector<std::pair<int, double>> loss_log;  // (step, loss)
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Runs `steps` SGD steps over seeded epoch shuffles of the training set.
/// Deterministic for a fixed config seed.
TrainOutput train_model(SaliencyNet<double>& model,
                        const std::vector<Sample>& train,
                        const RunConfig& cfg, int steps);

struct PerImageEval {
  std::string id;
  int frame_label = 0;
  double existence_prob = 0.0;
  double threshold = 0.0;      // adaptive, in 8-bit units
  double f_adaptive = 0.0;     // only meaningful when has_mask
  double overlap_adaptive = 0.0;
  bool has_mask = false;
};

struct EvalOutput {
  std::vector<PerImageEval> per_image;
  PRCurve curve;
  /// F at the per-image adaptive threshold, averaged over images with a
  /// nonempty ground-truth mask.
  double mean_f_adaptive = 0.0;
  double mean_overlap = 0.0;
  /// Fraction of images whose existence probability crosses 0.5 on the
  /// correct side of the frame label.
  double existence_accuracy = 0.0;
};

/// Inference + metrics over a split. `maps_out`, when non-null, receives
/// the final 8-bit saliency map per sample (in sample order).
EvalOutput evaluate_model(const SaliencyNet<double>& model,
                          const std::vector<Sample>& samples,
                          const RunConfig& cfg,
                          std::vector<ImageU8>* maps_out = nullptr);

std::string metrics_to_json(const EvalOutput& eval,
                            const std::string& provenance);
std::string pr_curve_to_csv(const PRCurve& curve,
                            const std::string& provenance);

struct BenchStage {
  std::string name;
  double mean_seconds = 0.0;
};

/// Times the per-image pipeline stages (SLIC, objectness, pixel-level
/// forward, fusion) over `n_images` synthetic images of the given size.
std::vector<BenchStage> run_bench(const RunConfig& cfg, int n_images, int h,
                                  int w);

std::string bench_to_text(const std::vector<BenchStage>& stages,
                          int n_images, int h, int w);

}  // namespace smoke
