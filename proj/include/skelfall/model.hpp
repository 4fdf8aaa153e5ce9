#pragma once

#include <optional>
#include <vector>

#include "skelfall/graph.hpp"
#include "skelfall/preprocess.hpp"
#include "skelfall/tensor.hpp"

namespace skelfall {

struct BlockPlan {
  int channels = 0;
  int stride = 1;
  bool operator==(const BlockPlan&) const = default;
};

struct ModelConfig {
  int num_joints = 25;
  int bodies = 2;
  int in_channels = 3;
  int embed_channels = 64;
  std::vector<BlockPlan> blocks{{96, 1}, {128, 2}, {192, 2}};
  int temporal_kernel = 9;  // kt, odd
  int stcn_kernel_t = 3;    // odd
  int stcn_kernel_v = 3;    // odd
  int num_classes = 2;
  int hops = 3;
  uint64_t seed = 1;

  /// True when the architecture matches the stock 25-joint plan, which is the
  /// only one held to the parameter budget.
  bool is_default_plan() const;
};

/// Batch-norm on the raw stream, then two 1x1 projections with ReLU.
struct EmbeddingStream {
  BatchNorm input_bn;
  Tensor w1, b1;  // C0 x C x 1 x 1, C0
  Tensor w2, b2;  // C0 x C0 x 1 x 1, C0

  static EmbeddingStream make(int in_channels, int out_channels, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool training);
};

/// Mixes features along the joint axis: out[..., i] = sum_j a[i, j] x[..., j].
Tensor node_mix(const Tensor& x, const Tensor& a);

/// Partitioned spatial graph convolution with edge importance, batch norm,
/// residual and ReLU.
struct SGCNLayer {
  std::array<Tensor, AdjacencySet::kPartitions> w;  // C' x C x 1 x 1 each
  Tensor bias;                                      // C'
  EdgeImportance importance;
  BatchNorm bn;
  std::optional<Tensor> res_w;  // 1x1 when channel count changes
  std::optional<BatchNorm> res_bn;

  static SGCNLayer make(int c_in, int c_out, int joints, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const AdjacencySet& adj, bool training);
};

/// kt x 1 convolution over time (stride on time), batch norm.
struct TemporalConv {
  Tensor w;
  BatchNorm bn;
  int kernel = 9;
  int stride = 1;

  static TemporalConv make(int channels, int kernel, int stride, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool training);
};

/// kt' x kv' convolution over the (time, joint) grid, batch norm. No
/// adjacency: this pathway treats joints as a plain axis.
struct STConv {
  Tensor w;
  BatchNorm bn;
  int kernel_t = 3;
  int kernel_v = 3;
  int stride = 1;

  static STConv make(int c_in, int c_out, int kt, int kv, int stride, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool training);
};

/// Identity when shape is preserved, strided 1x1 conv + batch norm otherwise.
struct ResidualPath {
  std::optional<Tensor> w;
  std::optional<BatchNorm> bn;
  int stride = 1;

  static ResidualPath make(int c_in, int c_out, int stride, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool training);
};

/// ReLU(SGCN->TGCN + STCN + residual); both pathways emit the same shape.
struct BasicBlock {
  SGCNLayer sgcn;
  TemporalConv tgcn;
  STConv stcn;
  ResidualPath residual;

  static BasicBlock make(int c_in, int c_out, int stride, const ModelConfig& cfg, int joints,
                         std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const AdjacencySet& adj, bool training);
};

class FallDetectorNet {
 public:
  FallDetectorNet(ModelConfig cfg, SkeletonTopology topology);

  /// joints, velocity: (N * bodies) x C x T x V -> logits N x num_classes.
  Tensor forward(const Tensor& joints, const Tensor& velocity, bool training);

  std::vector<Parameter> parameters();
  std::vector<std::pair<std::string, std::vector<real>*>> buffers();

  int64_t count_params();
  /// 2 x multiply-accumulate count of one forward pass at batch 1 (all body
  /// slots included).
  int64_t estimate_flops(int window) const;

  const ModelConfig& config() const { return cfg_; }
  const SkeletonTopology& topology() const { return topology_; }
  const AdjacencySet& adjacency() const { return adjacency_; }
  NormStats& norm_stats() { return norm_stats_; }
  const NormStats& norm_stats() const { return norm_stats_; }

  EmbeddingStream& joint_stream() { return joint_stream_; }
  EmbeddingStream& velocity_stream() { return velocity_stream_; }
  std::vector<BasicBlock>& blocks() { return blocks_; }

 private:
  ModelConfig cfg_;
  SkeletonTopology topology_;
  AdjacencySet adjacency_;
  EmbeddingStream joint_stream_;
  EmbeddingStream velocity_stream_;
  std::vector<BasicBlock> blocks_;
  Tensor head_w, head_b;
  NormStats norm_stats_;
};

}  // namespace skelfall
