#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "smoke/checkpoint.hpp"
#include "smoke/conv.hpp"
#include "smoke/ops.hpp"
#include "smoke/params.hpp"
#include "smoke/rng.hpp"
#include "smoke/tape.hpp"

namespace smoke {

/// Wiring of the smoke-existence branch; see existence_forward for the
/// per-strategy structure.
enum class Strategy { kS1 = 1, kS2, kS3, kS4, kS5, kS6 };

inline std::string strategy_name(Strategy s) {
  return "S" + std::to_string(static_cast<int>(s));
}

inline Strategy strategy_from_name(const std::string& name) {
  for (int i = 1; i <= 6; ++i)
    if (name == "S" + std::to_string(i)) return static_cast<Strategy>(i);
  throw std::invalid_argument("unknown existence strategy '" + name + "'");
}

struct NetConfig {
  int input_h = 64;
  int input_w = 64;
  /// Factor applied to the VGG channel plan (64,128,256,512,512) and to
  /// rcl_channels; scaled counts are clamped to >= 1.
  double channel_scale = 1.0;
  int rcl_steps = 3;
  int rcl_channels = 64;
  Strategy existence_strategy = Strategy::kS3;
  bool supervise_intermediate = false;
  /// Inputs to the learned fusion layer besides the pixel map. With both
  /// false the pixel map is the final prediction and no fusion layer exists.
  bool fuse_object = true;
  bool fuse_region = false;
  /// Swap the alpha/(1-alpha) class weights of the pixel loss. Off = the
  /// loss exactly as written (alpha on positives).
  bool balanced_loss = false;
  /// Pass the 1x1-reduced Conv5_3 signal through a sigmoid before it enters
  /// SmRCL4. Off = raw signal.
  bool coarse_sigmoid = false;

  int scaled(int base) const {
    return std::max(1, static_cast<int>(std::lround(base * channel_scale)));
  }

  bool fusion_enabled() const { return fuse_object || fuse_region; }

  void validate() const {
    if (input_h <= 0 || input_w <= 0 || input_h % 8 != 0 || input_w % 8 != 0)
      throw std::invalid_argument("NetConfig: input size " +
                                  std::to_string(input_h) + "x" +
                                  std::to_string(input_w) +
                                  " must be positive and divisible by 8");
    if (channel_scale <= 0.0)
      throw std::invalid_argument("NetConfig: channel_scale must be > 0");
    if (rcl_steps < 1)
      throw std::invalid_argument("NetConfig: rcl_steps must be >= 1");
    if (rcl_channels < 1)
      throw std::invalid_argument("NetConfig: rcl_channels must be >= 1");
  }
};

template <class T>
struct EncoderFeatures {
  Tensor<T> conv1_2;  // full resolution
  Tensor<T> conv2_2;  // 1/2
  Tensor<T> conv3_3;  // 1/4
  Tensor<T> conv4_3;  // 1/8
  Tensor<T> conv5_3;  // 1/8
};

template <class T>
struct DecoderOutputs {
  Tensor<T> smrcl4;  // 1/8
  Tensor<T> smrcl3;  // 1/4
  Tensor<T> smrcl2;  // 1/2
  Tensor<T> smrcl1;  // full resolution
  Tensor<T> pixel_map;  // (N,1,H,W), values in (0,1)
};

struct ArchAudit {
  int encoder_convs = 0;
  int pools = 0;
  int rcl_blocks = 0;
  int deconvs = 0;
};

template <class T>
struct TrainBatch {
  Tensor<T> images;          // (N,3,H,W), values in [0,1]
  Tensor<T> masks;           // (N,1,H,W), values in {0,1}
  std::vector<int> labels;   // frame labels, one per image
  Tensor<T> object_maps;     // (N,1,H,W) in [0,1]; required if fuse_object
  Tensor<T> region_maps;     // (N,1,H,W) in [0,1]; required if fuse_region
};

template <class T>
struct InferOutputs {
  Tensor<T> final_map;   // fused map when fusion is enabled, else pixel map
  Tensor<T> pixel_map;
  std::vector<T> existence_prob;  // softmax probability of the smoke class
};

/// Joint loss: class-weighted pixel cross-entropy on the final saliency map
/// plus softmax cross-entropy on the existence logits, averaged over the
/// batch. Pixel weights follow the loss as written (alpha on positives);
/// `balanced` swaps them.
template <class T>
Tensor<T> joint_loss(Tape<T>& tape, const Tensor<T>& final_map,
                     const Tensor<T>& logits, const Tensor<T>& masks,
                     const std::vector<int>& labels, bool balanced = false) {
  if (!logits.all_finite())
    throw std::domain_error("joint_loss: non-finite logits");
  Tensor<T> pix = saliency_bce(tape, final_map, masks, balanced);
  Tensor<T> z = softmax2(tape, logits);
  Tensor<T> frm = pick_neg_log(tape, z, labels);
  return reduce_mean(tape, elementwise_add(tape, pix, frm));
}

/// The full saliency network: VGG16-plan encoder (13 convs, 4 pools, the
/// 4th pool stride-1 so the top stays at 1/8 resolution), a decoder of four
/// recurrent convolutional blocks joined by three 2x2/stride-2 transposed
/// convolutions, a learned 1x1 fusion layer over saliency maps, and one of
/// six existence-prediction heads.
template <class T>
class SaliencyNet {
 public:
  SaliencyNet(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    build(rng);
  }

  const NetConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Learning-rate multiplier for the existence head ("exist.*"); see
  /// SgdOptimizer for why the head needs one.
  void set_head_lr_multiplier(T mult) { opt_.set_lr_scale("exist.", mult); }

  ArchAudit audit() const {
    ArchAudit a;
    a.encoder_convs = static_cast<int>(encoder_.size());
    a.pools = static_cast<int>(pools_.size());
    a.rcl_blocks = static_cast<int>(rcls_.size());
    a.deconvs = static_cast<int>(deconvs_.size());
    return a;
  }

  EncoderFeatures<T> encode(Tape<T>& tape, const Tensor<T>& image) const {
    const Shape s = image.shape();
    if (s.c != 3)
      detail::shape_error("encode", "expected 3-channel input, got " +
                                        s.str());
    if (s.h % 8 != 0 || s.w % 8 != 0)
      detail::shape_error("encode", "input " + s.str() +
                                        " not divisible by 8");
    EncoderFeatures<T> f;
    Tensor<T> x = image;
    // conv1_1, conv1_2 | pool | conv2_1, conv2_2 | pool | conv3_1..3_3 |
    // pool | conv4_1..4_3 | pool(3x3,s1) | conv5_1..5_3
    static constexpr int kStageLen[5] = {2, 2, 3, 3, 3};
    std::size_t li = 0;
    for (int stage = 0; stage < 5; ++stage) {
      for (int j = 0; j < kStageLen[stage]; ++j) {
        const ConvLayer& L = encoder_[li++];
        x = relu(tape, conv2d(tape, x, L.w, L.b, 1, 1));
      }
      if (stage == 0) f.conv1_2 = x;
      if (stage == 1) f.conv2_2 = x;
      if (stage == 2) f.conv3_3 = x;
      if (stage == 3) f.conv4_3 = x;
      if (stage == 4) f.conv5_3 = x;
      if (stage < 4) {
        const PoolSpec& p = pools_[stage];
        x = maxpool(tape, x, p.kernel, p.stride);
      }
    }
    return f;
  }

  DecoderOutputs<T> decode(Tape<T>& tape, const EncoderFeatures<T>& f) const {
    DecoderOutputs<T> d;
    Tensor<T> coarse = conv2d(tape, f.conv5_3, coarse_w_, coarse_b_, 1, 0);
    if (cfg_.coarse_sigmoid) coarse = sigmoid(tape, coarse);
    Tensor<T> sig = rcl_forward(tape, rcls_[0],
                                concat_channels<T>(tape, {coarse, f.conv4_3}));
    d.smrcl4 = sig;
    const Tensor<T>* skips[3] = {&f.conv3_3, &f.conv2_2, &f.conv1_2};
    Tensor<T>* outs[3] = {&d.smrcl3, &d.smrcl2, &d.smrcl1};
    for (int i = 0; i < 3; ++i) {
      const DeconvLayer& up = deconvs_[i];
      Tensor<T> u = transposed_conv2d(tape, sig, up.w, up.b, 2);
      if (u.shape().h != skips[i]->shape().h ||
          u.shape().w != skips[i]->shape().w)
        detail::shape_error("decode", "skip feature " +
                                          skips[i]->shape().str() +
                                          " does not match decoder signal " +
                                          u.shape().str());
      sig = rcl_forward(tape, rcls_[i + 1],
                        concat_channels<T>(tape, {u, *skips[i]}));
      *outs[i] = sig;
    }
    d.pixel_map = sigmoid(tape, conv2d(tape, d.smrcl1, map_w_, map_b_, 1, 0));
    return d;
  }

  /// Learned fusion of saliency maps: channel-concat, 1x1 convolution, then
  /// sigmoid. The map count must match the layer the model was built with
  /// (1 + fuse_object + fuse_region).
  Tensor<T> fuse(Tape<T>& tape, const std::vector<Tensor<T>>& maps) const {
    if (!cfg_.fusion_enabled())
      throw std::logic_error("fuse: model built without a fusion layer");
    return sigmoid(tape, conv2d(tape, concat_channels(tape, maps), fuse_w_,
                                fuse_b_, 1, 0));
  }

  Tensor<T> existence_forward(Tape<T>& tape, const EncoderFeatures<T>& f,
                              const DecoderOutputs<T>& d) const {
    const Tensor<T>& sal = d.pixel_map;
    switch (cfg_.existence_strategy) {
      case Strategy::kS1:
        return fully_connected(tape, sal, fc_w_, fc_b_);
      case Strategy::kS2: {
        Tensor<T> h = relu(tape, conv2d(tape, sal, exist_conv1_w_,
                                        exist_conv1_b_, 1, 1));
        h = relu(tape, conv2d(tape, h, exist_conv2_w_, exist_conv2_b_, 1, 1));
        return fully_connected(tape, h, fc_w_, fc_b_);
      }
      case Strategy::kS3:
      case Strategy::kS4: {
        Tensor<T> pooled = avgpool(tape, sal, 8, 8);
        Tensor<T> proj =
            conv2d(tape, f.conv4_3, exist_proj_w_, exist_proj_b_, 1, 0);
        if (cfg_.existence_strategy == Strategy::kS4)
          proj = sigmoid(tape, proj);
        return fully_connected(tape, elementwise_mul(tape, pooled, proj),
                               fc_w_, fc_b_);
      }
      case Strategy::kS5:
        return fully_connected(tape, avgpool(tape, f.conv4_3, 8, 8), fc_w_,
                               fc_b_);
      case Strategy::kS6: {
        Tensor<T> proj =
            conv2d(tape, f.conv1_2, exist_proj_w_, exist_proj_b_, 1, 0);
        return fully_connected(tape, elementwise_mul(tape, sal, proj), fc_w_,
                               fc_b_);
      }
    }
    throw std::logic_error("existence_forward: bad strategy");
  }

  /// One optimization step on a batch. Returns the loss value.
  T train_step(const TrainBatch<T>& batch, T lr, T momentum) {
    Tape<T> tape;
    Tensor<T> loss = forward_loss(tape, batch);
    backward(loss, tape);
    opt_.step(params_, lr, momentum);
    return loss.item();
  }

  /// Forward pass and loss without any parameter update; used by the
  /// finite-difference harness.
  ///
  /// The pixel-level prediction is supervised directly. With fusion
  /// enabled the fused map carries the same pixel objective on top, which
  /// is what trains W and b jointly; supervising only the fused map lets
  /// the optimizer hollow out the pixel branch whenever the object maps
  /// alone explain the masks (exactly what happens with ground-truth-
  /// derived boxes), killing both the saliency and the existence heads.
  Tensor<T> forward_loss(Tape<T>& tape, const TrainBatch<T>& batch) const {
    EncoderFeatures<T> f = encode(tape, batch.images);
    DecoderOutputs<T> d = decode(tape, f);
    Tensor<T> logits = existence_forward(tape, f, d);
    Tensor<T> loss = joint_loss(tape, d.pixel_map, logits, batch.masks,
                                batch.labels, cfg_.balanced_loss);
    if (cfg_.fusion_enabled()) {
      Tensor<T> fused = fuse(tape, fusion_inputs(d.pixel_map, batch));
      loss = elementwise_add(
          tape, loss,
          reduce_mean(tape, saliency_bce(tape, fused, batch.masks,
                                         cfg_.balanced_loss)));
    }
    if (cfg_.supervise_intermediate) {
      const Tensor<T>* mids[3] = {&d.smrcl2, &d.smrcl3, &d.smrcl4};
      for (int i = 0; i < 3; ++i) {
        const int factor = 2 << i;
        Tensor<T> m = sigmoid(
            tape, conv2d(tape, *mids[i], ds_w_[i], ds_b_[i], 1, 0));
        Tensor<T> target = subsample_mask(batch.masks, factor);
        loss = elementwise_add(
            tape, loss,
            reduce_mean(tape,
                        saliency_bce(tape, m, target, cfg_.balanced_loss)));
      }
    }
    return loss;
  }

  InferOutputs<T> infer(const TrainBatch<T>& batch) const {
    Tape<T> tape;
    tape.set_recording(false);
    EncoderFeatures<T> f = encode(tape, batch.images);
    DecoderOutputs<T> d = decode(tape, f);
    InferOutputs<T> out;
    out.pixel_map = d.pixel_map;
    out.final_map = cfg_.fusion_enabled()
                        ? fuse(tape, fusion_inputs(d.pixel_map, batch))
                        : d.pixel_map;
    Tensor<T> z = softmax2(tape, existence_forward(tape, f, d));
    out.existence_prob.resize(z.shape().n);
    for (int n = 0; n < z.shape().n; ++n)
      out.existence_prob[n] = z.data()[2 * n + 1];
    return out;
  }

 private:
  struct ConvLayer {
    Tensor<T> w, b;
  };
  struct DeconvLayer {
    Tensor<T> w, b;
  };
  struct PoolSpec {
    int kernel, stride;
  };
  struct RclBlock {
    Tensor<T> ff_w, ff_b;  // 3x3 feed-forward
    Tensor<T> rec_w;       // 3x3 recurrent, shared across steps, no bias
    Tensor<T> out_w, out_b;  // 1x1 output
  };

 public:
  /// Unrolled recurrent convolution: state_0 = conv_ff(x);
  /// state_t = relu(conv_ff(x) + conv_rec(state_{t-1})), t = 1..T;
  /// output = conv_1x1(state_T). Spatial size preserved.
  Tensor<T> rcl_forward(Tape<T>& tape, const RclBlock& blk,
                        const Tensor<T>& x) const {
    Tensor<T> ff = conv2d(tape, x, blk.ff_w, blk.ff_b, 1, 1);
    Tensor<T> state = ff;
    for (int t = 0; t < cfg_.rcl_steps; ++t) {
      Tensor<T> rec = conv2d(tape, state, blk.rec_w, Tensor<T>{}, 1, 1);
      state = relu(tape, elementwise_add(tape, ff, rec));
    }
    return conv2d(tape, state, blk.out_w, blk.out_b, 1, 0);
  }

  /// Test access to decoder blocks (index 0 = SmRCL4 .. 3 = SmRCL1).
  RclBlock& rcl_block(int i) { return rcls_.at(i); }

 private:
  std::vector<Tensor<T>> fusion_inputs(const Tensor<T>& pixel_map,
                                       const TrainBatch<T>& batch) const {
    std::vector<Tensor<T>> maps{pixel_map};
    if (cfg_.fuse_object) {
      if (!batch.object_maps.defined())
        throw std::invalid_argument("fuse: object maps required but absent");
      maps.push_back(batch.object_maps);
    }
    if (cfg_.fuse_region) {
      if (!batch.region_maps.defined())
        throw std::invalid_argument("fuse: region maps required but absent");
      maps.push_back(batch.region_maps);
    }
    return maps;
  }

  static Tensor<T> subsample_mask(const Tensor<T>& mask, int factor) {
    const Shape s = mask.shape();
    Tensor<T> out({s.n, 1, s.h / factor, s.w / factor});
    for (int n = 0; n < s.n; ++n)
      for (int y = 0; y < s.h / factor; ++y)
        for (int x = 0; x < s.w / factor; ++x)
          out.at(n, 0, y, x) = mask.at(n, 0, y * factor, x * factor);
    return out;
  }

  ConvLayer make_conv(const std::string& name, int cin, int cout, int k,
                      Rng& rng) {
    ConvLayer L;
    L.w = params_
              .create_init(name + ".weight", {cout, cin, k, k},
                             cin * k * k, cout * k * k, rng)
              .tensor;
    L.b = params_.create(name + ".bias", {1, cout, 1, 1}).tensor;
    return L;
  }

  DeconvLayer make_deconv(const std::string& name, int cin, int cout, int k,
                          Rng& rng) {
    DeconvLayer L;
    L.w = params_
              .create_init(name + ".weight", {cin, cout, k, k},
                             cin * k * k, cout * k * k, rng)
              .tensor;
    L.b = params_.create(name + ".bias", {1, cout, 1, 1}).tensor;
    return L;
  }

  void build(Rng& rng) {
    const int plan[5] = {cfg_.scaled(64), cfg_.scaled(128), cfg_.scaled(256),
                         cfg_.scaled(512), cfg_.scaled(512)};
    static constexpr int kStageLen[5] = {2, 2, 3, 3, 3};
    int cin = 3;
    for (int stage = 0; stage < 5; ++stage) {
      for (int j = 0; j < kStageLen[stage]; ++j) {
        const std::string name = "conv" + std::to_string(stage + 1) + "_" +
                                 std::to_string(j + 1);
        encoder_.push_back(make_conv(name, cin, plan[stage], 3, rng));
        cin = plan[stage];
      }
    }
    pools_ = {{2, 2}, {2, 2}, {2, 2}, {3, 1}};

    const int r = cfg_.scaled(cfg_.rcl_channels);
    coarse_w_ = params_
                    .create_init("coarse.weight", {1, plan[4], 1, 1},
                                   plan[4], 1, rng)
                    .tensor;
    coarse_b_ = params_.create("coarse.bias", {1, 1, 1, 1}).tensor;

    // Feed-forward input widths: SmRCL4 sees (coarse + conv4_3), the rest
    // see (upsampled decoder signal + skip feature).
    const int ff_in[4] = {1 + plan[3], r + plan[2], r + plan[1], r + plan[0]};
    const char* rcl_names[4] = {"smrcl4", "smrcl3", "smrcl2", "smrcl1"};
    for (int i = 0; i < 4; ++i) {
      RclBlock blk;
      const std::string base = rcl_names[i];
      blk.ff_w = params_
                     .create_init(base + ".ff.weight", {r, ff_in[i], 3, 3},
                                    ff_in[i] * 9, r * 9, rng)
                     .tensor;
      blk.ff_b = params_.create(base + ".ff.bias", {1, r, 1, 1}).tensor;
      blk.rec_w = params_
                      .create_init(base + ".rec.weight", {r, r, 3, 3},
                                     r * 9, r * 9, rng)
                      .tensor;
      blk.out_w = params_
                      .create_init(base + ".out.weight", {r, r, 1, 1}, r,
                                     r, rng)
                      .tensor;
      blk.out_b = params_.create(base + ".out.bias", {1, r, 1, 1}).tensor;
      rcls_.push_back(blk);
    }
    for (int i = 0; i < 3; ++i)
      deconvs_.push_back(
          make_deconv("deconv" + std::to_string(3 - i), r, r, 2, rng));

    map_w_ = params_.create_init("map.weight", {1, r, 1, 1}, r, 1, rng)
                 .tensor;
    map_b_ = params_.create("map.bias", {1, 1, 1, 1}).tensor;

    if (cfg_.supervise_intermediate) {
      for (int i = 0; i < 3; ++i) {
        ds_w_[i] = params_
                       .create_init("ds" + std::to_string(2 + i) +
                                          ".weight",
                                      {1, r, 1, 1}, r, 1, rng)
                       .tensor;
        ds_b_[i] =
            params_.create("ds" + std::to_string(2 + i) + ".bias",
                           {1, 1, 1, 1})
                .tensor;
      }
    }

    if (cfg_.fusion_enabled()) {
      const int fin = 1 + (cfg_.fuse_object ? 1 : 0) +
                      (cfg_.fuse_region ? 1 : 0);
      fuse_w_ = params_.create_init("fuse.weight", {1, fin, 1, 1}, fin, 1,
                                      rng)
                    .tensor;
      fuse_b_ = params_.create("fuse.bias", {1, 1, 1, 1}).tensor;
    }

    build_existence(rng, plan, r);
  }

  void build_existence(Rng& rng, const int plan[5], int r) {
    const int H = cfg_.input_h, W = cfg_.input_w;
    int fc_in = 0;
    switch (cfg_.existence_strategy) {
      case Strategy::kS1:
        fc_in = H * W;
        break;
      case Strategy::kS2: {
        const int hc = cfg_.scaled(64);
        exist_conv1_w_ = params_
                             .create_init("exist.conv1.weight",
                                            {hc, 1, 3, 3}, 9, hc * 9, rng)
                             .tensor;
        exist_conv1_b_ =
            params_.create("exist.conv1.bias", {1, hc, 1, 1}).tensor;
        exist_conv2_w_ = params_
                             .create_init("exist.conv2.weight",
                                            {hc, hc, 3, 3}, hc * 9, hc * 9,
                                            rng)
                             .tensor;
        exist_conv2_b_ =
            params_.create("exist.conv2.bias", {1, hc, 1, 1}).tensor;
        fc_in = hc * H * W;
        break;
      }
      case Strategy::kS3:
      case Strategy::kS4:
        exist_proj_w_ = params_
                            .create_init("exist.proj.weight",
                                           {1, plan[3], 1, 1}, plan[3], 1,
                                           rng)
                            .tensor;
        exist_proj_b_ =
            params_.create("exist.proj.bias", {1, 1, 1, 1}).tensor;
        fc_in = (H / 8) * (W / 8);
        break;
      case Strategy::kS5: {
        if (H / 8 < 8 || W / 8 < 8)
          throw std::invalid_argument(
              "NetConfig: strategy S5 needs input >= 64x64 (8x8 pooling on "
              "the 1/8-resolution Conv4_3)");
        fc_in = plan[3] * (H / 64) * (W / 64);
        break;
      }
      case Strategy::kS6:
        exist_proj_w_ = params_
                            .create_init("exist.proj.weight",
                                           {1, plan[0], 1, 1}, plan[0], 1,
                                           rng)
                            .tensor;
        exist_proj_b_ =
            params_.create("exist.proj.bias", {1, 1, 1, 1}).tensor;
        fc_in = H * W;
        break;
    }
    (void)r;
    fc_w_ = params_.create_init("exist.fc.weight", {2, fc_in, 1, 1}, fc_in,
                                  2, rng)
                .tensor;
    fc_b_ = params_.create("exist.fc.bias", {1, 2, 1, 1}).tensor;
  }

  NetConfig cfg_;
  ParamStore<T> params_;
  SgdOptimizer<T> opt_;

  std::vector<ConvLayer> encoder_;
  std::vector<PoolSpec> pools_;
  std::vector<RclBlock> rcls_;
  std::vector<DeconvLayer> deconvs_;
  Tensor<T> coarse_w_, coarse_b_;
  Tensor<T> map_w_, map_b_;
  Tensor<T> fuse_w_, fuse_b_;
  Tensor<T> ds_w_[3], ds_b_[3];
  Tensor<T> exist_conv1_w_, exist_conv1_b_;
  Tensor<T> exist_conv2_w_, exist_conv2_b_;
  Tensor<T> exist_proj_w_, exist_proj_b_;
  Tensor<T> fc_w_, fc_b_;
};

}  // namespace smoke
