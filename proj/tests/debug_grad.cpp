// Scratch probe: epsilon sensitivity of FD mismatches (not a registered test).
#include <cstdio>

#include "oracles.hpp"
#include "smoke/net.hpp"

using namespace smoke;

int main() {
  NetConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.channel_scale = 1.0 / 16.0;
  cfg.rcl_steps = 1;
  cfg.existence_strategy = Strategy::kS3;
  cfg.fuse_object = true;
  SaliencyNet<double> net(cfg, 97);
  Rng rng(98);
  TrainBatch<double> batch;
  batch.images = Tensor<double>({1, 3, 16, 16});
  for (auto& v : batch.images.values()) v = rng.uniform();
  batch.masks = Tensor<double>({1, 1, 16, 16});
  for (auto& v : batch.masks.values()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  batch.labels = {0};
  batch.object_maps = Tensor<double>({1, 1, 16, 16});
  for (auto& v : batch.object_maps.values()) v = rng.uniform();

  Tape<double> tape;
  net.params().zero_grads();
  Tensor<double> loss = net.forward_loss(tape, batch);
  backward(loss, tape);
  std::printf("loss = %.6f\n", loss.item());

  auto eval = [&]() {
    Tape<double> t;
    t.set_recording(false);
    return net.forward_loss(t, batch).item();
  };

  struct Probe {
    const char* id;
    std::int64_t j;
  };
  Probe probes[] = {{"deconv3.bias", 2},   {"deconv3.weight", 47},
                    {"coarse.weight", 0},  {"conv5_3.bias", 0},
                    {"smrcl4.rec.weight", 10}, {"conv1_1.weight", 0}};
  for (const auto& pr : probes) {
    auto& p = net.params().at(pr.id).tensor;
    const double a = p.grad()[pr.j];
    for (double eps : {1e-4, 1e-5, 1e-6, 1e-7}) {
      const double n = oracle::central_diff(eval, p, pr.j, eps);
      std::printf("%-20s j=%-4lld eps=%.0e analytic=% .10e numeric=% .10e rel=%.3e\n",
                  pr.id, static_cast<long long>(pr.j), eps, a, n,
                  oracle::rel_err(a, n));
    }
  }
  return 0;
}
