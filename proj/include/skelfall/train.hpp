#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skelfall/data.hpp"
#include "skelfall/metrics.hpp"
#include "skelfall/model.hpp"

namespace skelfall {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  real lr0 = real(0.05);
  real lr_decay = real(0.9);   // multiplier applied every lr_step epochs
  int lr_step = 10;
  real momentum = real(0.9);
  real weight_decay = real(0.0005);
  bool balanced = true;
  int eval_every = 1;  // validation cadence in epochs
};

/// lr0 * decay^floor(epoch / step).
real lr_at(int epoch, const TrainConfig& cfg);

/// Emits batches with floor(B/2) positives each. Negatives are drawn without
/// replacement until exhausted, then reshuffled; every positive appears at
/// least once per epoch. Batch lists depend only on (seed, epoch).
class BalancedBatchSampler {
 public:
  BalancedBatchSampler(std::vector<int> positives, std::vector<int> negatives, int batch_size,
                       uint64_t seed);
  std::vector<std::vector<int>> epoch_batches(uint64_t epoch) const;
  int batches_per_epoch() const;

 private:
  std::vector<int> pos_, neg_;
  int batch_size_;
  uint64_t seed_;
};

/// SGD with momentum and decoupled-from-nothing weight decay:
/// v <- m*v + (g + wd*p); p <- p - lr*v; grads cleared afterwards.
class SgdOptimizer {
 public:
  SgdOptimizer(real momentum, real weight_decay);
  void step(std::vector<Parameter>& params, real lr);

 private:
  real momentum_;
  real weight_decay_;
  std::map<std::string, std::vector<real>> velocity_;
};

struct EpochRecord {
  int epoch = 0;
  real lr = 0;
  double mean_loss = 0;
  std::optional<MetricsReport> val;
  double seconds = 0;
};

struct TrainOutcome {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_f1 = -1;
};

struct RunConfig;  // config.hpp

/// Full schedule: balanced batches, fresh random windows per epoch, forward /
/// cross-entropy / backward / SGD step; per-epoch validation on the split's
/// test side; checkpoints (last + best validation F1) under out_dir when it
/// is non-empty.
TrainOutcome train_model(FallDetectorNet& net, const Dataset& ds, const DatasetSplit& split,
                         const RunConfig& cfg, const std::string& out_dir,
                         const std::function<void(const EpochRecord&)>& on_epoch = {});

struct EvalOptions {
  int batch_size = 32;
  bool transfer = false;  // forbids any parameter / BN-statistic mutation
};

/// Deterministic window-at-0 evaluation; scores are softmax fall
/// probabilities.
std::vector<double> score_samples(FallDetectorNet& net,
                                  const std::vector<const DataSample*>& samples,
                                  const PreprocessConfig& pre, int batch_size = 32);
MetricsReport evaluate_model(FallDetectorNet& net, const std::vector<const DataSample*>& samples,
                             const PreprocessConfig& pre, const EvalOptions& opts = {});

struct ProfileResult {
  int64_t params = 0;
  int64_t flops = 0;
  double mean_inference_ms = 0;
  double train_min_per_epoch_estimate = 0;
  int runs = 0;
  int epoch_samples = 0;
};
/// Wall-clock single-sample forwards (2 warmup runs excluded) plus a per-epoch
/// training-time extrapolation for epoch_samples samples.
ProfileResult profile_model(FallDetectorNet& net, int window, int n_runs, int epoch_samples);

}  // namespace skelfall
