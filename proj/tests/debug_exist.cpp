// Scratch probe: magnitudes along the S3 existence branch.
#include <cstdio>

#include "smoke/checkpoint.hpp"
#include "smoke/config.hpp"
#include "smoke/dataset.hpp"
#include "smoke/pipeline.hpp"

using namespace smoke;

static void stats(const Tensor<double>& t, const char* name) {
  double lo = 1e30, hi = -1e30, mean = 0;
  for (auto v : t.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
  }
  mean /= t.numel();
  std::printf("%-12s %-14s min % .3e max % .3e mean % .3e\n", name,
              t.shape().str().c_str(), lo, hi, mean);
}

int main(int argc, char** argv) {
  const char* ckpt = argc > 1 ? argv[1] : "/tmp/c7run2/model.snap";
  NetConfig net = load_net_sidecar(
      std::string(ckpt).substr(0, std::string(ckpt).size() - 5) + ".json");
  SaliencyNet<double> model(net, 1);
  load_snapshot(model.params(), ckpt);
  RunConfig cfg;
  cfg.net = net;
  auto samples =
      load_dataset(scan_dataset("/tmp/c7/test", "test"));
  for (int which : {0, 40}) {  // a smoke image and a background image
    TrainBatch<double> batch = make_batch(samples, {which}, cfg);
    Tape<double> tape;
    tape.set_recording(false);
    auto f = model.encode(tape, batch.images);
    auto d = model.decode(tape, f);
    std::printf("--- sample %d (%s, label %d)\n", which,
                samples[which].id.c_str(), samples[which].frame_label);
    stats(f.conv4_3, "conv4_3");
    stats(d.pixel_map, "pixel_map");
    Tensor<double> pooled = avgpool(tape, d.pixel_map, 8, 8);
    stats(pooled, "pooled");
    Tensor<double> proj =
        conv2d(tape, f.conv4_3, model.params().at("exist.proj.weight").tensor,
               model.params().at("exist.proj.bias").tensor, 1, 0);
    stats(proj, "proj");
    Tensor<double> prod = elementwise_mul(tape, pooled, proj);
    stats(prod, "product");
    Tensor<double> logits = model.existence_forward(tape, f, d);
    std::printf("logits: %.6e %.6e\n", logits.data()[0], logits.data()[1]);
  }
  stats(model.params().at("exist.fc.weight").tensor, "fc.weight");
  stats(model.params().at("exist.proj.weight").tensor, "proj.weight");
  return 0;
}
