#include "skelfall/model.hpp"

#include <cmath>

namespace skelfall {

namespace {

Tensor conv_weight(int c_out, int c_in, int kt, int kv, std::mt19937_64& rng) {
  const real bound = real(1) / std::sqrt(static_cast<real>(c_in * kt * kv));
  return Tensor::uniform({c_out, c_in, kt, kv}, bound, rng, true);
}

}  // namespace

bool ModelConfig::is_default_plan() const {
  const ModelConfig def;
  return num_joints == def.num_joints && in_channels == def.in_channels &&
         embed_channels == def.embed_channels && blocks == def.blocks &&
         temporal_kernel == def.temporal_kernel && stcn_kernel_t == def.stcn_kernel_t &&
         stcn_kernel_v == def.stcn_kernel_v && num_classes == def.num_classes;
}

EmbeddingStream EmbeddingStream::make(int in_channels, int out_channels, std::mt19937_64& rng) {
  EmbeddingStream s;
  s.input_bn = BatchNorm::make(in_channels);
  s.w1 = conv_weight(out_channels, in_channels, 1, 1, rng);
  s.b1 = Tensor::zeros({out_channels}, true);
  s.w2 = conv_weight(out_channels, out_channels, 1, 1, rng);
  s.b2 = Tensor::zeros({out_channels}, true);
  return s;
}

Tensor EmbeddingStream::forward(const Tensor& x, bool training) {
  Tensor h = batch_norm(x, input_bn, training);
  h = relu(add_channel_bias(conv2d(h, w1, {}), b1));
  h = relu(add_channel_bias(conv2d(h, w2, {}), b2));
  return h;
}

Tensor node_mix(const Tensor& x, const Tensor& a) {
  if (x.ndim() != 4 || a.ndim() != 2 || a.dim(0) != a.dim(1) || x.dim(3) != a.dim(0))
    fail(ErrorCode::dimension,
         "node_mix: " + shape_str(x.shape()) + " with " + shape_str(a.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), v = x.dim(3);
  Tensor flat = reshape(x, {n * c * t, v});
  Tensor mixed = matmul(flat, transpose2d(a));
  return reshape(mixed, {n, c, t, v});
}

SGCNLayer SGCNLayer::make(int c_in, int c_out, int joints, std::mt19937_64& rng) {
  SGCNLayer layer;
  for (auto& wp : layer.w) wp = conv_weight(c_out, c_in, 1, 1, rng);
  layer.bias = Tensor::zeros({c_out}, true);
  layer.importance = EdgeImportance::make(joints);
  layer.bn = BatchNorm::make(c_out);
  if (c_in != c_out) {
    layer.res_w = conv_weight(c_out, c_in, 1, 1, rng);
    layer.res_bn = BatchNorm::make(c_out);
  }
  return layer;
}

Tensor SGCNLayer::forward(const Tensor& x, const AdjacencySet& adj, bool training) {
  if (x.dim(3) != adj.joint_count)
    fail(ErrorCode::dimension, "sgcn joint count " + std::to_string(x.dim(3)) +
                                   " != adjacency " + std::to_string(adj.joint_count));
  const auto eff = effective_adjacency(adj, importance);
  Tensor agg;
  for (int p = 0; p < AdjacencySet::kPartitions; ++p) {
    Tensor h = node_mix(conv2d(x, w[p], {}), eff[p]);
    agg = p == 0 ? h : add(agg, h);
  }
  agg = add_channel_bias(agg, bias);
  Tensor y = batch_norm(agg, bn, training);
  Tensor res = res_w ? batch_norm(conv2d(x, *res_w, {}), *res_bn, training) : x;
  return relu(add(y, res));
}

TemporalConv TemporalConv::make(int channels, int kernel, int stride, std::mt19937_64& rng) {
  TemporalConv conv;
  conv.w = conv_weight(channels, channels, kernel, 1, rng);
  conv.bn = BatchNorm::make(channels);
  conv.kernel = kernel;
  conv.stride = stride;
  return conv;
}

Tensor TemporalConv::forward(const Tensor& x, bool training) {
  Conv2dOpts opts;
  opts.stride_t = stride;
  opts.pad_t = (kernel - 1) / 2;
  return batch_norm(conv2d(x, w, opts), bn, training);
}

STConv STConv::make(int c_in, int c_out, int kt, int kv, int stride, std::mt19937_64& rng) {
  STConv conv;
  conv.w = conv_weight(c_out, c_in, kt, kv, rng);
  conv.bn = BatchNorm::make(c_out);
  conv.kernel_t = kt;
  conv.kernel_v = kv;
  conv.stride = stride;
  return conv;
}

Tensor STConv::forward(const Tensor& x, bool training) {
  Conv2dOpts opts;
  opts.stride_t = stride;
  opts.pad_t = (kernel_t - 1) / 2;
  opts.pad_v = (kernel_v - 1) / 2;
  return batch_norm(conv2d(x, w, opts), bn, training);
}

ResidualPath ResidualPath::make(int c_in, int c_out, int stride, std::mt19937_64& rng) {
  ResidualPath path;
  path.stride = stride;
  if (c_in != c_out || stride != 1) {
    path.w = conv_weight(c_out, c_in, 1, 1, rng);
    path.bn = BatchNorm::make(c_out);
  }
  return path;
}

Tensor ResidualPath::forward(const Tensor& x, bool training) {
  if (!w) return x;
  Conv2dOpts opts;
  opts.stride_t = stride;
  return batch_norm(conv2d(x, *w, opts), *bn, training);
}

BasicBlock BasicBlock::make(int c_in, int c_out, int stride, const ModelConfig& cfg, int joints,
                            std::mt19937_64& rng) {
  BasicBlock block;
  block.sgcn = SGCNLayer::make(c_in, c_out, joints, rng);
  block.tgcn = TemporalConv::make(c_out, cfg.temporal_kernel, stride, rng);
  block.stcn = STConv::make(c_in, c_out, cfg.stcn_kernel_t, cfg.stcn_kernel_v, stride, rng);
  block.residual = ResidualPath::make(c_in, c_out, stride, rng);
  return block;
}

Tensor BasicBlock::forward(const Tensor& x, const AdjacencySet& adj, bool training) {
  Tensor spatial = sgcn.forward(x, adj, training);
  Tensor p1 = tgcn.forward(spatial, training);
  Tensor p2 = stcn.forward(x, training);
  Tensor r = residual.forward(x, training);
  return relu(add(add(p1, p2), r));
}

FallDetectorNet::FallDetectorNet(ModelConfig cfg, SkeletonTopology topology)
    : cfg_(std::move(cfg)), topology_(std::move(topology)) {
  if (cfg_.num_joints != topology_.joint_count)
    fail(ErrorCode::topology_mismatch,
         "model expects " + std::to_string(cfg_.num_joints) + " joints but topology has " +
             std::to_string(topology_.joint_count));
  if (cfg_.blocks.empty()) fail(ErrorCode::config, "model needs at least one block");
  if (cfg_.temporal_kernel % 2 == 0 || cfg_.stcn_kernel_t % 2 == 0 || cfg_.stcn_kernel_v % 2 == 0)
    fail(ErrorCode::config, "convolution kernels must be odd so pathways stay shape-aligned");
  if (cfg_.bodies < 1) fail(ErrorCode::config, "bodies must be >= 1");
  adjacency_ = build_adjacency(topology_, cfg_.hops);

  std::mt19937_64 rng(cfg_.seed);
  joint_stream_ = EmbeddingStream::make(cfg_.in_channels, cfg_.embed_channels, rng);
  velocity_stream_ = EmbeddingStream::make(cfg_.in_channels, cfg_.embed_channels, rng);
  int c_in = cfg_.embed_channels;
  for (const auto& plan : cfg_.blocks) {
    blocks_.push_back(BasicBlock::make(c_in, plan.channels, plan.stride, cfg_, cfg_.num_joints, rng));
    c_in = plan.channels;
  }
  const real bound = real(1) / std::sqrt(static_cast<real>(c_in));
  head_w = Tensor::uniform({c_in, cfg_.num_classes}, bound, rng, true);
  head_b = Tensor::zeros({cfg_.num_classes}, true);

  if (cfg_.is_default_plan()) {
    const int64_t params = count_params();
    if (params < 1'000'000 || params > 1'600'000)
      fail(ErrorCode::config, "default plan parameter count " + std::to_string(params) +
                                  " outside the expected [1.0M, 1.6M] budget");
  }
}

Tensor FallDetectorNet::forward(const Tensor& joints, const Tensor& velocity, bool training) {
  if (joints.shape() != velocity.shape())
    fail(ErrorCode::dimension, "joint stream " + shape_str(joints.shape()) +
                                   " != velocity stream " + shape_str(velocity.shape()));
  if (joints.ndim() != 4 || joints.dim(3) != cfg_.num_joints ||
      joints.dim(1) != cfg_.in_channels || joints.dim(0) % cfg_.bodies != 0)
    fail(ErrorCode::dimension, "bad model input shape " + shape_str(joints.shape()));
  Tensor z = add(joint_stream_.forward(joints, training),
                 velocity_stream_.forward(velocity, training));
  for (auto& block : blocks_) z = block.forward(z, adjacency_, training);
  Tensor pooled = group_mean(global_avg_pool(z), cfg_.bodies);
  return linear(pooled, head_w, head_b);
}

std::vector<Parameter> FallDetectorNet::parameters() {
  std::vector<Parameter> params;
  auto push = [&params](const std::string& name, Tensor t) { params.push_back({name, std::move(t)}); };
  auto push_bn = [&push](const std::string& prefix, BatchNorm& bn) {
    push(prefix + ".gamma", bn.gamma);
    push(prefix + ".beta", bn.beta);
  };
  auto push_stream = [&](const std::string& prefix, EmbeddingStream& s) {
    push_bn(prefix + ".bn", s.input_bn);
    push(prefix + ".w1", s.w1);
    push(prefix + ".b1", s.b1);
    push(prefix + ".w2", s.w2);
    push(prefix + ".b2", s.b2);
  };
  push_stream("embed.joint", joint_stream_);
  push_stream("embed.velocity", velocity_stream_);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b + 1);
    auto& block = blocks_[b];
    for (int p = 0; p < AdjacencySet::kPartitions; ++p) {
      push(prefix + ".sgcn.w" + std::to_string(p), block.sgcn.w[p]);
      push(prefix + ".sgcn.theta" + std::to_string(p), block.sgcn.importance.theta[p]);
    }
    push(prefix + ".sgcn.bias", block.sgcn.bias);
    push_bn(prefix + ".sgcn.bn", block.sgcn.bn);
    if (block.sgcn.res_w) {
      push(prefix + ".sgcn.res.w", *block.sgcn.res_w);
      push_bn(prefix + ".sgcn.res.bn", *block.sgcn.res_bn);
    }
    push(prefix + ".tgcn.w", block.tgcn.w);
    push_bn(prefix + ".tgcn.bn", block.tgcn.bn);
    push(prefix + ".stcn.w", block.stcn.w);
    push_bn(prefix + ".stcn.bn", block.stcn.bn);
    if (block.residual.w) {
      push(prefix + ".res.w", *block.residual.w);
      push_bn(prefix + ".res.bn", *block.residual.bn);
    }
  }
  push("head.w", head_w);
  push("head.b", head_b);
  return params;
}

std::vector<std::pair<std::string, std::vector<real>*>> FallDetectorNet::buffers() {
  std::vector<std::pair<std::string, std::vector<real>*>> out;
  auto push_bn = [&out](const std::string& prefix, BatchNorm& bn) {
    out.emplace_back(prefix + ".running_mean", &bn.running_mean);
    out.emplace_back(prefix + ".running_var", &bn.running_var);
  };
  push_bn("embed.joint.bn", joint_stream_.input_bn);
  push_bn("embed.velocity.bn", velocity_stream_.input_bn);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b + 1);
    auto& block = blocks_[b];
    push_bn(prefix + ".sgcn.bn", block.sgcn.bn);
    if (block.sgcn.res_bn) push_bn(prefix + ".sgcn.res.bn", *block.sgcn.res_bn);
    push_bn(prefix + ".tgcn.bn", block.tgcn.bn);
    push_bn(prefix + ".stcn.bn", block.stcn.bn);
    if (block.residual.bn) push_bn(prefix + ".res.bn", *block.residual.bn);
  }
  return out;
}

int64_t FallDetectorNet::count_params() {
  int64_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.numel();
  return total;
}

int64_t FallDetectorNet::estimate_flops(int window) const {
  const int64_t b = cfg_.bodies;  // batch 1 carries all body slots
  const int64_t v = cfg_.num_joints;
  int64_t t = window;
  const int64_t c0 = cfg_.embed_channels;
  // Multiply-accumulates; x2 at the end.
  int64_t macs = 0;
  macs += 2 * (cfg_.in_channels * c0 + c0 * c0) * t * v * b;  // two streams
  int64_t c_in = c0;
  for (const auto& plan : cfg_.blocks) {
    const int64_t c_out = plan.channels;
    macs += AdjacencySet::kPartitions * (c_in * c_out * t * v + c_out * t * v * v) * b;
    if (c_in != c_out) macs += c_in * c_out * t * v * b;  // sgcn residual
    const int64_t t_out = (t - 1) / plan.stride + 1;
    macs += c_out * c_out * cfg_.temporal_kernel * t_out * v * b;
    macs += c_in * c_out * cfg_.stcn_kernel_t * cfg_.stcn_kernel_v * t_out * v * b;
    if (c_in != c_out || plan.stride != 1) macs += c_in * c_out * t_out * v * b;
    c_in = c_out;
    t = t_out;
  }
  macs += c_in * cfg_.num_classes;
  return 2 * macs;
}

}  // namespace skelfall
