#include "skelfall/config.hpp"

#include <fstream>
#include <set>

namespace skelfall {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(ErrorCode::config, where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      fail(ErrorCode::config, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_pair(const json& j, const char* key, std::array<real, 2>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    fail(ErrorCode::config, std::string("'") + key + "' must be a [lo, hi] number pair");
  out[0] = static_cast<real>(v[0].get<double>());
  out[1] = static_cast<real>(v[1].get<double>());
}

void read_real(const json& j, const char* key, real& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) fail(ErrorCode::config, std::string("'") + key + "' must be a number");
  out = static_cast<real>(j.at(key).get<double>());
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  check_keys(j, "config", {"version", "seed", "model", "preprocess", "train", "data", "synth"});
  read(j, "version", cfg.version);
  if (cfg.version != 1)
    fail(ErrorCode::config, "unsupported config version " + std::to_string(cfg.version));
  read(j, "seed", cfg.seed);

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"joints", "bodies", "embed_channels", "blocks", "temporal_kernel",
                            "stcn_kernel", "num_classes", "hops"});
    read(m, "joints", cfg.model.num_joints);
    read(m, "bodies", cfg.model.bodies);
    read(m, "embed_channels", cfg.model.embed_channels);
    if (m.contains("blocks")) {
      const auto& blocks = m.at("blocks");
      if (!blocks.is_array() || blocks.empty())
        fail(ErrorCode::config, "'blocks' must be a non-empty array");
      cfg.model.blocks.clear();
      for (const auto& b : blocks) {
        check_keys(b, "blocks[]", {"channels", "stride"});
        BlockPlan plan;
        read(b, "channels", plan.channels);
        read(b, "stride", plan.stride);
        if (plan.channels < 1 || plan.stride < 1)
          fail(ErrorCode::config, "block channels and stride must be positive");
        cfg.model.blocks.push_back(plan);
      }
    }
    read(m, "temporal_kernel", cfg.model.temporal_kernel);
    if (m.contains("stcn_kernel")) {
      const auto& k = m.at("stcn_kernel");
      if (!k.is_array() || k.size() != 2)
        fail(ErrorCode::config, "'stcn_kernel' must be [kt, kv]");
      cfg.model.stcn_kernel_t = k[0].get<int>();
      cfg.model.stcn_kernel_v = k[1].get<int>();
    }
    read(m, "num_classes", cfg.model.num_classes);
    read(m, "hops", cfg.model.hops);
  }

  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    check_keys(p, "preprocess", {"max_frames", "window", "ref_joints"});
    read(p, "max_frames", cfg.preprocess.max_frames);
    read(p, "window", cfg.preprocess.window);
    if (p.contains("ref_joints")) {
      const auto& r = p.at("ref_joints");
      check_keys(r, "ref_joints", {"spine", "hip", "shoulder_left", "shoulder_right"});
      read(r, "spine", cfg.preprocess.ref.spine);
      read(r, "hip", cfg.preprocess.ref.hip);
      read(r, "shoulder_left", cfg.preprocess.ref.shoulder_left);
      read(r, "shoulder_right", cfg.preprocess.ref.shoulder_right);
    }
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train", {"epochs", "batch_size", "lr", "lr_decay", "lr_step", "momentum",
                            "weight_decay", "balanced", "eval_every"});
    read(t, "epochs", cfg.train.epochs);
    read(t, "batch_size", cfg.train.batch_size);
    read_real(t, "lr", cfg.train.lr0);
    read_real(t, "lr_decay", cfg.train.lr_decay);
    read(t, "lr_step", cfg.train.lr_step);
    read_real(t, "momentum", cfg.train.momentum);
    read_real(t, "weight_decay", cfg.train.weight_decay);
    read(t, "balanced", cfg.train.balanced);
    read(t, "eval_every", cfg.train.eval_every);
  }

  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"fall_class", "split", "topology"});
    read(d, "fall_class", cfg.data.fall_class);
    read(d, "split", cfg.data.split);
    read(d, "topology", cfg.data.topology);
  }

  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_keys(s, "synth", {"n_fall", "n_other", "fall_speed", "other_speed", "noise_std",
                            "frames", "seed", "fall_class"});
    read(s, "n_fall", cfg.synth.n_fall);
    read(s, "n_other", cfg.synth.n_other);
    read_pair(s, "fall_speed", cfg.synth.fall_speed_range);
    read_pair(s, "other_speed", cfg.synth.other_speed_range);
    read_real(s, "noise_std", cfg.synth.noise_std);
    if (s.contains("frames")) {
      const auto& f = s.at("frames");
      if (!f.is_array() || f.size() != 2) fail(ErrorCode::config, "'frames' must be [min, max]");
      cfg.synth.min_frames = f[0].get<int>();
      cfg.synth.max_frames = f[1].get<int>();
    }
    read(s, "seed", cfg.synth.seed);
    read(s, "fall_class", cfg.synth.fall_class);
  }

  cfg.model.seed = cfg.seed;
  validate_run_config(cfg);
  return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  json blocks = json::array();
  for (const auto& b : cfg.model.blocks)
    blocks.push_back({{"channels", b.channels}, {"stride", b.stride}});
  return json{
      {"version", cfg.version},
      {"seed", cfg.seed},
      {"model",
       {{"joints", cfg.model.num_joints},
        {"bodies", cfg.model.bodies},
        {"embed_channels", cfg.model.embed_channels},
        {"blocks", blocks},
        {"temporal_kernel", cfg.model.temporal_kernel},
        {"stcn_kernel", {cfg.model.stcn_kernel_t, cfg.model.stcn_kernel_v}},
        {"num_classes", cfg.model.num_classes},
        {"hops", cfg.model.hops}}},
      {"preprocess",
       {{"max_frames", cfg.preprocess.max_frames},
        {"window", cfg.preprocess.window},
        {"ref_joints",
         {{"spine", cfg.preprocess.ref.spine},
          {"hip", cfg.preprocess.ref.hip},
          {"shoulder_left", cfg.preprocess.ref.shoulder_left},
          {"shoulder_right", cfg.preprocess.ref.shoulder_right}}}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"lr", static_cast<double>(cfg.train.lr0)},
        {"lr_decay", static_cast<double>(cfg.train.lr_decay)},
        {"lr_step", cfg.train.lr_step},
        {"momentum", static_cast<double>(cfg.train.momentum)},
        {"weight_decay", static_cast<double>(cfg.train.weight_decay)},
        {"balanced", cfg.train.balanced},
        {"eval_every", cfg.train.eval_every}}},
      {"data",
       {{"fall_class", cfg.data.fall_class},
        {"split", cfg.data.split},
        {"topology", cfg.data.topology}}},
      {"synth",
       {{"n_fall", cfg.synth.n_fall},
        {"n_other", cfg.synth.n_other},
        {"fall_speed",
         {static_cast<double>(cfg.synth.fall_speed_range[0]),
          static_cast<double>(cfg.synth.fall_speed_range[1])}},
        {"other_speed",
         {static_cast<double>(cfg.synth.other_speed_range[0]),
          static_cast<double>(cfg.synth.other_speed_range[1])}},
        {"noise_std", static_cast<double>(cfg.synth.noise_std)},
        {"frames", {cfg.synth.min_frames, cfg.synth.max_frames}},
        {"seed", cfg.synth.seed},
        {"fall_class", cfg.synth.fall_class}}}};
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) {
    RunConfig cfg;
    cfg.model.seed = cfg.seed;
    return cfg;
  }
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::config, path + ": invalid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void validate_run_config(const RunConfig& cfg) {
  const auto positive = [](int value, const char* what) {
    if (value < 1) fail(ErrorCode::config, std::string(what) + " must be positive");
  };
  positive(cfg.model.num_joints, "model.joints");
  positive(cfg.model.bodies, "model.bodies");
  positive(cfg.model.embed_channels, "model.embed_channels");
  positive(cfg.model.temporal_kernel, "model.temporal_kernel");
  positive(cfg.model.num_classes, "model.num_classes");
  positive(cfg.model.hops, "model.hops");
  positive(cfg.preprocess.max_frames, "preprocess.max_frames");
  positive(cfg.preprocess.window, "preprocess.window");
  positive(cfg.train.epochs, "train.epochs");
  positive(cfg.train.batch_size, "train.batch_size");
  positive(cfg.train.lr_step, "train.lr_step");
  positive(cfg.train.eval_every, "train.eval_every");
  if (cfg.train.lr0 <= 0 || cfg.train.lr_decay <= 0 || cfg.train.momentum < 0 ||
      cfg.train.weight_decay < 0)
    fail(ErrorCode::config, "train hyperparameters must be positive (momentum/decay >= 0)");
  if (cfg.preprocess.window > cfg.preprocess.max_frames)
    fail(ErrorCode::config, "preprocess.window cannot exceed preprocess.max_frames");
  if (cfg.data.fall_class < 1 || cfg.data.fall_class > 120)
    fail(ErrorCode::config, "data.fall_class outside [1, 120]");
}

SkeletonTopology resolve_topology(const std::string& spec) {
  if (spec == "ntu25" || spec.empty()) return ntu_topology();
  return load_topology(spec);
}

}  // namespace skelfall
