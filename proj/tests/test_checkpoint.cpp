#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "skelfall/checkpoint.hpp"
#include "skelfall/synthetic.hpp"
#include "skelfall/train.hpp"

using namespace skelfall;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.seed = 23;
  cfg.model.num_joints = 25;
  cfg.model.bodies = 1;
  cfg.model.embed_channels = 5;
  cfg.model.blocks = {{7, 1}, {9, 2}};
  cfg.model.temporal_kernel = 3;
  cfg.model.hops = 2;
  cfg.model.seed = cfg.seed;
  cfg.preprocess.max_frames = 20;
  cfg.preprocess.window = 16;
  return cfg;
}

std::vector<const DataSample*> pointer_view(const Dataset& ds) {
  std::vector<const DataSample*> v;
  for (const auto& s : ds.samples) v.push_back(&s);
  return v;
}

Dataset tiny_corpus() {
  SyntheticSpec spec;
  spec.n_fall = 3;
  spec.n_other = 9;
  spec.min_frames = 18;
  spec.max_frames = 24;
  spec.seed = 77;
  Dataset ds;
  for (auto& s : generate_synthetic(spec)) {
    DataSample d;
    d.id = s.id;
    d.meta = SampleId::parse(s.id);
    d.action_class = s.action_class;
    d.label = s.label;
    d.seq = std::move(s.seq);
    ds.samples.push_back(std::move(d));
  }
  return ds;
}

}  // namespace

TEST_CASE("checkpoint round-trip yields bit-identical logits") {
  const RunConfig cfg = small_config();
  FallDetectorNet net(cfg.model, ntu_topology());
  // Perturb away from init so the payload is non-trivial.
  std::mt19937_64 rng(9);
  for (auto& p : net.parameters())
    for (auto& v : p.tensor.data()) v += real(0.01) * static_cast<real>((rng() % 100)) / 100;
  net.norm_stats().mean = {real(0.1), real(0.2), real(0.3)};
  net.norm_stats().stddev = {real(1.1), real(1.2), real(1.3)};

  const Dataset ds = tiny_corpus();
  const auto view = pointer_view(ds);
  const auto scores_before = score_samples(net, view, cfg.preprocess);

  const std::string path = (fs::temp_directory_path() / "skelfall_roundtrip.ckpt").string();
  save_checkpoint(net, cfg, path);
  LoadedModel loaded = load_checkpoint(path);
  fs::remove(path);

  CHECK(state_checksum(net) == state_checksum(*loaded.net));
  const auto scores_after = score_samples(*loaded.net, view, loaded.config.preprocess);
  REQUIRE(scores_before.size() == scores_after.size());
  for (size_t i = 0; i < scores_before.size(); ++i)
    CHECK(scores_before[i] == scores_after[i]);  // bitwise
  CHECK(loaded.config.preprocess.window == cfg.preprocess.window);
  CHECK(loaded.net->topology().center_joint == net.topology().center_joint);
}

TEST_CASE("checkpoints of non-NTU topologies rebuild their graph") {
  RunConfig cfg = small_config();
  cfg.model.num_joints = 7;
  cfg.model.hops = 2;
  SkeletonTopology topo;
  topo.joint_count = 7;
  topo.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {2, 5}, {5, 6}};
  topo.center_joint = 2;
  FallDetectorNet net(cfg.model, topo);
  const std::string path = (fs::temp_directory_path() / "skelfall_topo.ckpt").string();
  save_checkpoint(net, cfg, path);
  LoadedModel loaded = load_checkpoint(path);
  fs::remove(path);
  CHECK(loaded.net->topology().joint_count == 7);
  CHECK(loaded.net->topology().edges == topo.edges);
  for (int p = 0; p < 3; ++p)
    CHECK(loaded.net->adjacency().partitions[p].data() == net.adjacency().partitions[p].data());
}

TEST_CASE("corrupted checkpoints are rejected with a format error") {
  const std::string path = (fs::temp_directory_path() / "skelfall_bad.ckpt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), Error);  // missing file -> io error
}

TEST_CASE("transfer evaluation leaves every byte of state untouched") {
  const RunConfig cfg = small_config();
  FallDetectorNet net(cfg.model, ntu_topology());
  const Dataset ds = tiny_corpus();
  const auto view = pointer_view(ds);
  const uint64_t before = state_checksum(net);
  EvalOptions opts;
  opts.transfer = true;
  const MetricsReport report = evaluate_model(net, view, cfg.preprocess, opts);
  CHECK(state_checksum(net) == before);
  CHECK(report.total() == static_cast<int64_t>(view.size()));
}

TEST_CASE("evaluating mismatched joint counts is a topology error") {
  RunConfig cfg = small_config();
  cfg.model.num_joints = 7;
  SkeletonTopology topo;
  topo.joint_count = 7;
  topo.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}};
  topo.center_joint = 3;
  FallDetectorNet net(cfg.model, topo);  // 7-joint model
  const Dataset ds = tiny_corpus();     // 25-joint data
  const auto view = pointer_view(ds);
  CHECK_THROWS_AS(score_samples(net, view, cfg.preprocess), Error);
}
