#include "smoke/config.hpp"

#include <fstream>

#include "json.hpp"
#include "smoke/errors.hpp"

using nlohmann::json;

namespace smoke {

namespace {

json net_to_json(const NetConfig& n) {
  return json{{"input_h", n.input_h},
              {"input_w", n.input_w},
              {"channel_scale", n.channel_scale},
              {"rcl_steps", n.rcl_steps},
              {"rcl_channels", n.rcl_channels},
              {"existence_strategy", strategy_name(n.existence_strategy)},
              {"supervise_intermediate", n.supervise_intermediate},
              {"fuse_object", n.fuse_object},
              {"fuse_region", n.fuse_region},
              {"balanced_loss", n.balanced_loss},
              {"coarse_sigmoid", n.coarse_sigmoid}};
}

NetConfig net_from_json(const json& j) {
  NetConfig n;
  n.input_h = j.value("input_h", n.input_h);
  n.input_w = j.value("input_w", n.input_w);
  n.channel_scale = j.value("channel_scale", n.channel_scale);
  n.rcl_steps = j.value("rcl_steps", n.rcl_steps);
  n.rcl_channels = j.value("rcl_channels", n.rcl_channels);
  if (j.contains("existence_strategy"))
    n.existence_strategy =
        strategy_from_name(j["existence_strategy"].get<std::string>());
  n.supervise_intermediate =
      j.value("supervise_intermediate", n.supervise_intermediate);
  n.fuse_object = j.value("fuse_object", n.fuse_object);
  n.fuse_region = j.value("fuse_region", n.fuse_region);
  n.balanced_loss = j.value("balanced_loss", n.balanced_loss);
  n.coarse_sigmoid = j.value("coarse_sigmoid", n.coarse_sigmoid);
  return n;
}

json to_json(const RunConfig& c) {
  return json{
      {"seed", c.seed},
      {"net", net_to_json(c.net)},
      {"optim",
       {{"lr", c.optim.lr},
        {"momentum", c.optim.momentum},
        {"head_lr_mult", c.optim.head_lr_mult},
        {"batch_size", c.optim.batch_size},
        {"steps", c.optim.steps}}},
      {"objectness", {{"lambda", c.objectness.lambda}}},
      {"slic",
       {{"superpixels", c.slic.superpixels},
        {"compactness", c.slic.compactness},
        {"iterations", c.slic.iterations}}},
      {"augment",
       {{"grid_x", c.hide_seek.grid_x},
        {"grid_y", c.hide_seek.grid_y},
        {"p_hide", c.hide_seek.p_hide},
        {"hide_mask", c.hide_seek.hide_mask},
        {"poisson_tol", c.poisson_tol},
        {"poisson_max_iters", c.poisson_max_iters}}},
      {"paths", {{"dataset", c.dataset_dir}, {"out", c.out_dir}}}};
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("net")) c.net = net_from_json(j["net"]);
  if (j.contains("optim")) {
    const auto& o = j["optim"];
    c.optim.lr = o.value("lr", c.optim.lr);
    c.optim.momentum = o.value("momentum", c.optim.momentum);
    c.optim.head_lr_mult = o.value("head_lr_mult", c.optim.head_lr_mult);
    c.optim.batch_size = o.value("batch_size", c.optim.batch_size);
    c.optim.steps = o.value("steps", c.optim.steps);
  }
  if (j.contains("objectness"))
    c.objectness.lambda = j["objectness"].value("lambda", c.objectness.lambda);
  if (j.contains("slic")) {
    const auto& s = j["slic"];
    c.slic.superpixels = s.value("superpixels", c.slic.superpixels);
    c.slic.compactness = s.value("compactness", c.slic.compactness);
    c.slic.iterations = s.value("iterations", c.slic.iterations);
  }
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    c.hide_seek.grid_x = a.value("grid_x", c.hide_seek.grid_x);
    c.hide_seek.grid_y = a.value("grid_y", c.hide_seek.grid_y);
    c.hide_seek.p_hide = a.value("p_hide", c.hide_seek.p_hide);
    c.hide_seek.hide_mask = a.value("hide_mask", c.hide_seek.hide_mask);
    c.poisson_tol = a.value("poisson_tol", c.poisson_tol);
    c.poisson_max_iters = a.value("poisson_max_iters", c.poisson_max_iters);
  }
  if (j.contains("paths")) {
    c.dataset_dir = j["paths"].value("dataset", c.dataset_dir);
    c.out_dir = j["paths"].value("out", c.out_dir);
  }
  return c;
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) {
  return to_json(cfg).dump(2);
}

RunConfig config_from_json(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("bad config JSON: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write config " + path);
  os << config_to_json(cfg) << "\n";
}

std::string config_hash(const RunConfig& cfg) {
  // nlohmann::json orders keys, so dump() is canonical.
  const std::string s = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string provenance_json(const RunConfig& cfg) {
  json j{{"config_hash", config_hash(cfg)},
         {"seed", cfg.seed},
         {"version", "0.1.0"}};
  return j.dump();
}

void save_net_sidecar(const NetConfig& net, const std::string& path,
                      const std::string& provenance) {
  json j{{"net", net_to_json(net)}};
  if (!provenance.empty()) j["provenance"] = json::parse(provenance);
  std::ofstream os(path);
  if (!os) throw DataError("cannot write sidecar " + path);
  os << j.dump(2) << "\n";
}

NetConfig load_net_sidecar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open sidecar " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("bad sidecar JSON " + path + ": " + e.what());
  }
  return net_from_json(j.at("net"));
}

}  // namespace smoke
