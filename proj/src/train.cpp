#include "skelfall/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

#include "skelfall/checkpoint.hpp"
#include "skelfall/config.hpp"

namespace skelfall {

real lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs)
    fail(ErrorCode::invalid_argument, "epoch " + std::to_string(epoch) + " outside schedule");
  return cfg.lr0 * static_cast<real>(std::pow(static_cast<double>(cfg.lr_decay), epoch / cfg.lr_step));
}

namespace {

// Keeps the batch-order stream distinct from per-sample window streams.
constexpr uint64_t kSamplerStream = 0xBA7C4ull;

void shuffle_indices(std::vector<int>& v, std::mt19937_64& rng) {
  // Fisher-Yates on raw draws; std::shuffle is implementation-defined.
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

BalancedBatchSampler::BalancedBatchSampler(std::vector<int> positives, std::vector<int> negatives,
                                           int batch_size, uint64_t seed)
    : pos_(std::move(positives)), neg_(std::move(negatives)), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ < 2) fail(ErrorCode::config, "balanced batches need batch_size >= 2");
  if (pos_.empty() || neg_.empty())
    fail(ErrorCode::config, "balanced sampling needs both classes in the training split");
}

int BalancedBatchSampler::batches_per_epoch() const {
  const int pos_per = batch_size_ / 2;
  const int neg_per = batch_size_ - pos_per;
  const auto div_up = [](size_t a, int b) { return static_cast<int>((a + b - 1) / b); };
  return std::max(div_up(neg_.size(), neg_per), div_up(pos_.size(), pos_per));
}

std::vector<std::vector<int>> BalancedBatchSampler::epoch_batches(uint64_t epoch) const {
  const int pos_per = batch_size_ / 2;
  const int neg_per = batch_size_ - pos_per;
  std::mt19937_64 rng = sample_rng(seed_, kSamplerStream, epoch);

  // Cycle both pools without replacement, reshuffling on wraparound.
  std::vector<int> pos = pos_, neg = neg_;
  shuffle_indices(pos, rng);
  shuffle_indices(neg, rng);
  size_t pi = 0, ni = 0;
  auto take = [&rng](std::vector<int>& pool, size_t& cursor) {
    if (cursor >= pool.size()) {
      shuffle_indices(pool, rng);
      cursor = 0;
    }
    return pool[cursor++];
  };

  std::vector<std::vector<int>> batches(static_cast<size_t>(batches_per_epoch()));
  for (auto& batch : batches) {
    batch.reserve(static_cast<size_t>(batch_size_));
    for (int k = 0; k < pos_per; ++k) batch.push_back(take(pos, pi));
    for (int k = 0; k < neg_per; ++k) batch.push_back(take(neg, ni));
  }
  return batches;
}

SgdOptimizer::SgdOptimizer(real momentum, real weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {}

void SgdOptimizer::step(std::vector<Parameter>& params, real lr) {
  for (auto& param : params) {
    auto& p = param.tensor.data();
    auto& v = velocity_[param.name];
    if (v.empty()) v.assign(p.size(), real(0));
    const bool has_grad = param.tensor.has_grad();
    const auto& g = param.tensor.grad();
    if (!detail::all_finite(g))
      fail(ErrorCode::training, "non-finite gradient in parameter '" + param.name + "'");
    for (size_t i = 0; i < p.size(); ++i) {
      const real grad = (has_grad ? g[i] : real(0)) + weight_decay_ * p[i];
      v[i] = momentum_ * v[i] + grad;
      if (lr != real(0)) p[i] -= lr * v[i];
    }
    param.tensor.zero_grad();
  }
}

namespace {

struct PreparedSample {
  const DataSample* sample;
  SkeletonSequence prepared;
};

std::vector<PreparedSample> prepare_all(const std::vector<const DataSample*>& samples,
                                        const PreprocessConfig& pre) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto* s : samples) out.push_back({s, prepare_sequence(s->seq, pre)});
  return out;
}

std::vector<double> score_prepared(FallDetectorNet& net, const std::vector<PreparedSample>& samples,
                                   const PreprocessConfig& pre, int batch_size) {
  NoGradGuard no_grad;
  std::vector<double> scores;
  scores.reserve(samples.size());
  const int k = net.config().num_classes;
  for (size_t begin = 0; begin < samples.size(); begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(samples.size(), begin + static_cast<size_t>(batch_size));
    std::vector<ModelInput> inputs;
    inputs.reserve(end - begin);
    for (size_t i = begin; i < end; ++i)
      inputs.push_back(finalize_sample(samples[i].prepared, net.norm_stats(),
                                       samples[i].sample->label, 0, pre.window));
    auto [joints, velocity] = to_model_tensors(inputs, net.config().bodies);
    Tensor logits = net.forward(joints, velocity, false);
    const auto probs = softmax_rows(logits);
    for (size_t i = 0; i < end - begin; ++i)
      scores.push_back(static_cast<double>(probs[i * k + 1]));
  }
  return scores;
}

}  // namespace

std::vector<double> score_samples(FallDetectorNet& net,
                                  const std::vector<const DataSample*>& samples,
                                  const PreprocessConfig& pre, int batch_size) {
  if (samples.empty()) fail(ErrorCode::invalid_argument, "no samples to evaluate");
  if (samples.front()->seq.joints != net.config().num_joints)
    fail(ErrorCode::topology_mismatch,
         "checkpoint expects " + std::to_string(net.config().num_joints) + " joints but data has " +
             std::to_string(samples.front()->seq.joints));
  return score_prepared(net, prepare_all(samples, pre), pre, batch_size);
}

MetricsReport evaluate_model(FallDetectorNet& net, const std::vector<const DataSample*>& samples,
                             const PreprocessConfig& pre, const EvalOptions& opts) {
  const uint64_t before = opts.transfer ? state_checksum(net) : 0;
  const auto scores = score_samples(net, samples, pre, opts.batch_size);
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto* s : samples) labels.push_back(s->label);
  MetricsReport report = confusion(scores, labels);
  if (opts.transfer && state_checksum(net) != before)
    fail(ErrorCode::internal, "transfer evaluation mutated model state");
  return report;
}

TrainOutcome train_model(FallDetectorNet& net, const Dataset& ds, const DatasetSplit& split,
                         const RunConfig& cfg, const std::string& out_dir,
                         const std::function<void(const EpochRecord&)>& on_epoch) {
  const SplitView view = split_dataset(ds, split);
  if (view.train.empty()) fail(ErrorCode::config, "training split is empty");
  std::vector<int> positives, negatives;
  for (size_t i = 0; i < view.train.size(); ++i)
    (view.train[i]->label == 1 ? positives : negatives).push_back(static_cast<int>(i));
  if (cfg.train.balanced && (positives.empty() || negatives.empty()))
    fail(ErrorCode::config, "balanced training needs both classes; split '" + split.name +
                                "' has " + std::to_string(positives.size()) + " positives");

  auto prepared_train = prepare_all(view.train, cfg.preprocess);
  std::vector<SkeletonSequence> stats_input;
  stats_input.reserve(prepared_train.size());
  for (const auto& p : prepared_train) stats_input.push_back(p.prepared);
  net.norm_stats() = compute_norm_stats(stats_input);
  stats_input.clear();
  stats_input.shrink_to_fit();
  auto prepared_test = prepare_all(view.test, cfg.preprocess);

  std::unique_ptr<BalancedBatchSampler> balanced;
  if (cfg.train.balanced)
    balanced = std::make_unique<BalancedBatchSampler>(positives, negatives, cfg.train.batch_size,
                                                      cfg.seed);

  SgdOptimizer optimizer(cfg.train.momentum, cfg.train.weight_decay);
  TrainOutcome outcome;
  const bool checkpointing = !out_dir.empty();
  namespace fs = std::filesystem;
  if (checkpointing) fs::create_directories(out_dir);

  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const real lr = lr_at(epoch, cfg.train);

    std::vector<std::vector<int>> batches;
    if (balanced) {
      batches = balanced->epoch_batches(static_cast<uint64_t>(epoch));
    } else {
      std::vector<int> order(view.train.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::mt19937_64 rng = sample_rng(cfg.seed, kSamplerStream, static_cast<uint64_t>(epoch));
      shuffle_indices(order, rng);
      for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.train.batch_size))
        batches.emplace_back(order.begin() + static_cast<long>(b),
                             order.begin() + static_cast<long>(std::min(
                                                 order.size(), b + static_cast<size_t>(cfg.train.batch_size))));
    }

    double loss_sum = 0;
    for (const auto& batch : batches) {
      std::vector<ModelInput> inputs;
      std::vector<int> labels;
      inputs.reserve(batch.size());
      labels.reserve(batch.size());
      for (int idx : batch) {
        const auto& entry = prepared_train[static_cast<size_t>(idx)];
        std::mt19937_64 rng =
            sample_rng(cfg.seed, static_cast<uint64_t>(idx), static_cast<uint64_t>(epoch));
        const int start = draw_window_start(entry.prepared.frames, cfg.preprocess.window, rng);
        inputs.push_back(finalize_sample(entry.prepared, net.norm_stats(), entry.sample->label,
                                         start, cfg.preprocess.window));
        labels.push_back(entry.sample->label);
      }
      auto [joints, velocity] = to_model_tensors(inputs, net.config().bodies);
      Tensor logits = net.forward(joints, velocity, true);
      Tensor loss = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(static_cast<double>(loss.item())))
        fail(ErrorCode::training, "non-finite loss at epoch " + std::to_string(epoch));
      loss.backward();
      auto params = net.parameters();
      optimizer.step(params, lr);
      loss_sum += static_cast<double>(loss.item());
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.mean_loss = batches.empty() ? 0 : loss_sum / static_cast<double>(batches.size());
    const bool do_eval = !prepared_test.empty() &&
                         ((epoch + 1) % cfg.train.eval_every == 0 || epoch + 1 == cfg.train.epochs);
    if (do_eval)
      record.val = [&] {
        const auto scores = score_prepared(net, prepared_test, cfg.preprocess, 32);
        std::vector<int> labels;
        labels.reserve(prepared_test.size());
        for (const auto& p : prepared_test) labels.push_back(p.sample->label);
        return confusion(scores, labels);
      }();
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (checkpointing) {
      save_checkpoint(net, cfg, (fs::path(out_dir) / "last.ckpt").string());
      const double f1 = record.val && record.val->f1 ? *record.val->f1 : -1;
      if (record.val && f1 > outcome.best_f1) {
        outcome.best_f1 = f1;
        outcome.best_epoch = epoch;
        save_checkpoint(net, cfg, (fs::path(out_dir) / "best.ckpt").string());
      }
    }
    if (on_epoch) on_epoch(record);
    outcome.history.push_back(std::move(record));
  }
  return outcome;
}

ProfileResult profile_model(FallDetectorNet& net, int window, int n_runs, int epoch_samples) {
  if (n_runs < 1) fail(ErrorCode::invalid_argument, "profile needs at least one run");
  ProfileResult result;
  result.params = net.count_params();
  result.flops = net.estimate_flops(window);
  result.runs = n_runs;
  result.epoch_samples = epoch_samples;

  const auto& cfg = net.config();
  std::mt19937_64 rng(12345);
  const Shape in_shape{cfg.bodies, cfg.in_channels, window, cfg.num_joints};
  Tensor joints = Tensor::uniform(in_shape, real(1), rng);
  Tensor velocity = Tensor::uniform(in_shape, real(0.1), rng);

  using clock = std::chrono::steady_clock;
  {
    NoGradGuard no_grad;
    for (int i = 0; i < 2; ++i) net.forward(joints, velocity, false);  // warmup
    const auto t0 = clock::now();
    for (int i = 0; i < n_runs; ++i) net.forward(joints, velocity, false);
    result.mean_inference_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count() / n_runs;
  }
  if (epoch_samples > 0) {
    // Train-mode forward updates batch-norm statistics; snapshot and restore
    // so profiling leaves the model untouched.
    std::vector<std::vector<real>> snapshot;
    auto buffers = net.buffers();
    snapshot.reserve(buffers.size());
    for (const auto& [name, vec] : buffers) snapshot.push_back(*vec);
    SgdOptimizer optimizer(real(0.9), real(0.0005));
    const auto t0 = clock::now();
    Tensor logits = net.forward(joints, velocity, true);
    Tensor loss = softmax_cross_entropy(logits, std::vector<int>{0});
    loss.backward();
    auto params = net.parameters();
    optimizer.step(params, real(0));  // lr 0: timing only, weights unchanged
    const double step_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.train_min_per_epoch_estimate = step_seconds * epoch_samples / 60.0;
    for (size_t i = 0; i < buffers.size(); ++i) *buffers[i].second = snapshot[i];
  }
  return result;
}

}  // namespace skelfall
