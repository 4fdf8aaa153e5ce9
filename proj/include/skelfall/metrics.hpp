#pragma once

#include <optional>
#include <string>
#include <vector>

namespace skelfall {

/// Confusion counts plus the derived binary metrics. Metrics with a zero
/// denominator are left unset and reported as undefined, never as 0.
struct MetricsReport {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> f1;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> auc;
  std::optional<double> fp_rate;
  std::optional<double> accuracy;
  std::string threshold = "argmax";

  int64_t total() const { return tp + fp + tn + fn; }
};

/// scores are fall probabilities; predicted positive iff score > threshold
/// (0.5 equals argmax over two logits). AUC is filled only when both classes
/// are present.
MetricsReport confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold = 0.5);

/// Rank-statistic AUC with ties counted half. Errors when only one class is
/// present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_to_text(const MetricsReport& report);

}  // namespace skelfall
