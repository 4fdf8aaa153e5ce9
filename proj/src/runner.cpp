#include "skelfall/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "skelfall/checkpoint.hpp"
#include "skelfall/synthetic.hpp"
#include "skelfall/train.hpp"

namespace skelfall {

namespace fs = std::filesystem;
using nlohmann::json;

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::io, "write failed: " + path);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorCode::io, "cannot move into place: " + path + ": " + ec.message());
}

namespace {

json metrics_json(const MetricsReport& report) { return json::parse(metrics_to_json(report)); }

json epoch_json(const EpochRecord& record) {
  json j{{"epoch", record.epoch},
         {"lr", static_cast<double>(record.lr)},
         {"mean_loss", record.mean_loss},
         {"seconds", record.seconds}};
  j["val"] = record.val ? metrics_json(*record.val) : json(nullptr);
  return j;
}

}  // namespace

std::string cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  if (out_dir.empty()) fail(ErrorCode::invalid_argument, "synth needs an output directory");
  const auto samples = generate_synthetic(cfg.synth);
  write_corpus(samples, out_dir);
  int falls = 0;
  for (const auto& s : samples) falls += s.label;
  json summary{{"dir", out_dir},
               {"samples", samples.size()},
               {"falls", falls},
               {"config", run_config_to_json(cfg)}};
  write_file_atomic((fs::path(out_dir) / "synth_config.json").string(), summary.dump(2) + "\n");
  return summary.dump(2);
}

std::string cmd_train(const RunConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir,
                      const std::function<void(const std::string&)>& on_epoch_json) {
  if (data_dir.empty() || out_dir.empty())
    fail(ErrorCode::invalid_argument, "train needs --data-dir and --out");
  const SkeletonTopology topology = resolve_topology(cfg.data.topology);
  RunConfig effective = cfg;
  effective.model.num_joints = topology.joint_count;
  effective.model.seed = effective.seed;

  const Dataset ds = load_dataset(data_dir, effective.data.fall_class, topology.joint_count);
  std::vector<std::string> ids;
  ids.reserve(ds.samples.size());
  for (const auto& s : ds.samples) ids.push_back(s.id);
  const DatasetSplit split = make_split(effective.data.split, ids);

  fs::create_directories(out_dir);
  write_file_atomic((fs::path(out_dir) / "effective_config.json").string(),
                    run_config_to_json(effective).dump(2) + "\n");
  write_id_list((fs::path(out_dir) / "train_ids.txt").string(), split.train_ids);
  write_id_list((fs::path(out_dir) / "test_ids.txt").string(), split.test_ids);

  FallDetectorNet net(effective.model, topology);

  std::ostringstream history;
  const auto outcome = train_model(net, ds, split, effective, out_dir,
                                   [&history, &on_epoch_json](const EpochRecord& record) {
                                     const std::string line = epoch_json(record).dump();
                                     history << line << "\n";
                                     if (on_epoch_json) on_epoch_json(line);
                                   });
  write_file_atomic((fs::path(out_dir) / "history.jsonl").string(), history.str());

  json summary{{"out_dir", out_dir},
               {"epochs", outcome.history.size()},
               {"train_samples", split.train_ids.size()},
               {"test_samples", split.test_ids.size()},
               {"best_epoch", outcome.best_epoch},
               {"checkpoint", (fs::path(out_dir) / "last.ckpt").string()},
               {"config", run_config_to_json(effective)}};
  if (!outcome.history.empty() && outcome.history.back().val)
    summary["final_val"] = metrics_json(*outcome.history.back().val);
  return summary.dump(2);
}

std::string cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
                     const std::string& split_override, const std::string& topology_override,
                     bool transfer, const std::string& out_path) {
  if (checkpoint_path.empty() || data_dir.empty())
    fail(ErrorCode::invalid_argument, "eval needs --checkpoint and --data-dir");
  LoadedModel loaded = load_checkpoint(checkpoint_path);
  FallDetectorNet& net = *loaded.net;

  if (!topology_override.empty()) {
    const SkeletonTopology topo = resolve_topology(topology_override);
    if (topo.joint_count != net.config().num_joints)
      fail(ErrorCode::topology_mismatch,
           "checkpoint expects " + std::to_string(net.config().num_joints) +
               " joints but topology '" + topology_override + "' has " +
               std::to_string(topo.joint_count));
  }

  const std::string split_name =
      split_override.empty() ? loaded.config.data.split : split_override;
  const Dataset ds =
      load_dataset(data_dir, loaded.config.data.fall_class, net.config().num_joints);
  std::vector<std::string> ids;
  ids.reserve(ds.samples.size());
  for (const auto& s : ds.samples) ids.push_back(s.id);
  const DatasetSplit split = make_split(split_name, ids);
  const SplitView view = split_dataset(ds, split);
  if (view.test.empty())
    fail(ErrorCode::config, "split '" + split_name + "' has no test samples under " + data_dir);

  EvalOptions opts;
  opts.transfer = transfer;
  const MetricsReport report = evaluate_model(net, view.test, loaded.config.preprocess, opts);

  json j = metrics_json(report);
  j["split"] = split_name;
  j["transfer"] = transfer;
  j["n"] = view.test.size();
  j["checkpoint"] = checkpoint_path;
  j["data_dir"] = data_dir;
  j["config"] = run_config_to_json(loaded.config);
  const std::string text = j.dump(2);
  if (!out_path.empty()) write_file_atomic(out_path, text + "\n");
  return text;
}

std::string cmd_profile(const std::string& checkpoint_path, const RunConfig& cfg, bool from_config,
                        int runs, int epoch_samples, const std::string& out_path) {
  std::unique_ptr<FallDetectorNet> net;
  RunConfig effective = cfg;
  if (!from_config) {
    LoadedModel loaded = load_checkpoint(checkpoint_path);
    net = std::move(loaded.net);
    effective = loaded.config;
  } else {
    const SkeletonTopology topology = resolve_topology(cfg.data.topology);
    effective.model.num_joints = topology.joint_count;
    effective.model.seed = effective.seed;
    net = std::make_unique<FallDetectorNet>(effective.model, topology);
  }
  const ProfileResult result =
      profile_model(*net, effective.preprocess.window, runs, epoch_samples);
  json j{{"params", result.params},
         {"flops", result.flops},
         {"mean_inference_ms", result.mean_inference_ms},
         {"train_min_per_epoch_estimate", result.train_min_per_epoch_estimate},
         {"runs", result.runs},
         {"epoch_samples", result.epoch_samples},
         {"window", effective.preprocess.window},
         {"config", run_config_to_json(effective)}};
  const std::string text = j.dump(2);
  if (!out_path.empty()) write_file_atomic(out_path, text + "\n");
  return text;
}

std::string cmd_inspect(const std::string& skeleton_path) {
  const RawSample sample = parse_skeleton_file(skeleton_path);
  const auto& seq = sample.seq;
  int valid = 0;
  for (int t = 0; t < seq.frames; ++t)
    if (!seq.frame_empty(t)) ++valid;

  std::ostringstream out;
  out << "file:        " << skeleton_path << "\n";
  out << "id:          " << sample.id << "\n";
  out << "setup:       " << sample.meta.setup << "\n";
  out << "camera:      " << sample.meta.camera << "\n";
  out << "subject:     " << sample.meta.subject << "\n";
  out << "replication: " << sample.meta.replication << "\n";
  out << "action:      " << sample.action_class << "\n";
  out << "frames:      " << seq.frames << " (" << valid << " with a skeleton)\n";
  out << "joints:      " << seq.joints << "\n";
  out << "bodies:      " << seq.bodies << "\n";
  for (int c = 0; c < 3; ++c) {
    real lo = 0, hi = 0;
    bool any = false;
    for (int t = 0; t < seq.frames; ++t)
      for (int m = 0; m < seq.bodies; ++m) {
        if (!seq.body_present(t, m)) continue;
        for (int v = 0; v < seq.joints; ++v) {
          const real x = seq.at(c, t, v, m);
          lo = any ? std::min(lo, x) : x;
          hi = any ? std::max(hi, x) : x;
          any = true;
        }
      }
    out << char('x' + c) << " range:     [" << lo << ", " << hi << "]\n";
  }
  return out.str();
}

}  // namespace skelfall
