#pragma once

#include <cstdint>
#include <string>

#include "smoke/augment.hpp"
#include "smoke/net.hpp"
#include "smoke/objectness.hpp"

namespace smoke {

struct OptimConfig {
  double lr = 2e-5;
  double momentum = 0.9;
  int batch_size = 8;
  int steps = 500;
  /// Caffe-style lr_mult for the existence head parameters.
  double head_lr_mult = 1000.0;
};

struct SlicConfig {
  int superpixels = 100;
  double compactness = 10.0;
  int iterations = 10;
};

/// One JSON file drives a full run; a fixed seed makes the run
/// deterministic end to end.
struct RunConfig {
  std::uint64_t seed = 42;
  NetConfig net;
  OptimConfig optim;
  ObjectnessParams objectness;
  SlicConfig slic;
  HideAndSeekParams hide_seek;
  double poisson_tol = 1e-6;
  int poisson_max_iters = 10000;
  std::string dataset_dir;
  std::string out_dir = "out";

  RunConfig() {
    net.channel_scale = 0.125;  // desk-scale default
  }
};

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);
std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);

/// FNV-1a hash of the canonical (sorted-key) JSON serialization.
std::string config_hash(const RunConfig& cfg);

/// {"config_hash": ..., "seed": ..., "version": ...} — attached to every
/// output artifact. Carries no timestamps so identical runs emit identical
/// artifacts.
std::string provenance_json(const RunConfig& cfg);

/// Checkpoint sidecar: the NetConfig needed to rebuild a model whose
/// parameters live in the snapshot next to it.
void save_net_sidecar(const NetConfig& net, const std::string& path,
                      const std::string& provenance);
NetConfig load_net_sidecar(const std::string& path);

}  // namespace smoke
