#include "skelfall/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "skelfall/error.hpp"

namespace skelfall {

MetricsReport confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold) {
  if (scores.empty() || scores.size() != labels.size())
    fail(ErrorCode::invalid_argument, "confusion needs matching non-empty scores and labels");
  MetricsReport r;
  bool both_classes = false;
  {
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < scores.size(); ++i) {
      const bool positive = labels[i] == 1;
      const bool predicted = scores[i] > threshold;
      if (positive && predicted) ++r.tp;
      else if (positive) ++r.fn;
      else if (predicted) ++r.fp;
      else ++r.tn;
      has_pos = has_pos || positive;
      has_neg = has_neg || !positive;
    }
    both_classes = has_pos && has_neg;
  }
  if (r.tp + r.fn > 0) r.sensitivity = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.tn + r.fp > 0) {
    r.specificity = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
    r.fp_rate = 1.0 - *r.specificity;
  }
  if (2 * r.tp + r.fp + r.fn > 0)
    r.f1 = 2.0 * static_cast<double>(r.tp) / static_cast<double>(2 * r.tp + r.fp + r.fn);
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
  if (both_classes) r.auc = roc_auc(scores, labels);
  return r;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    fail(ErrorCode::invalid_argument, "roc_auc needs matching non-empty scores and labels");
  int64_t n_pos = 0, n_neg = 0;
  for (int lab : labels) (lab == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    fail(ErrorCode::invalid_argument, "roc_auc undefined with a single class");

  // Average ranks over tie groups; AUC from the Mann-Whitney statistic.
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {
nlohmann::json opt_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}
std::string opt_pct(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", *v * 100.0);
  return buf;
}
}  // namespace

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["counts"] = {{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}};
  j["f1"] = opt_json(r.f1);
  j["sensitivity"] = opt_json(r.sensitivity);
  j["specificity"] = opt_json(r.specificity);
  j["auc"] = opt_json(r.auc);
  j["fp_rate"] = opt_json(r.fp_rate);
  j["accuracy"] = opt_json(r.accuracy);
  j["threshold"] = r.threshold;
  return j.dump(2);
}

std::string metrics_to_text(const MetricsReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "samples: %lld (tp %lld, fp %lld, tn %lld, fn %lld)\n",
                static_cast<long long>(r.total()), static_cast<long long>(r.tp),
                static_cast<long long>(r.fp), static_cast<long long>(r.tn),
                static_cast<long long>(r.fn));
  out += buf;
  out += "F1 Score     " + opt_pct(r.f1) + "\n";
  out += "Sensitivity  " + opt_pct(r.sensitivity) + "\n";
  out += "Specificity  " + opt_pct(r.specificity) + "\n";
  out += "AUC          " + opt_pct(r.auc) + "\n";
  out += "FP rate      " + opt_pct(r.fp_rate) + "\n";
  out += "Accuracy     " + opt_pct(r.accuracy) + "\n";
  return out;
}

}  // namespace skelfall
