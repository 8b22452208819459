#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "sfgru/numerics.hpp"

namespace sfgru {

// ROC-AUC as the Mann-Whitney statistic: the fraction of (positive,
// negative) pairs ranked correctly, ties counted half. Computed from average
// ranks in O(n log n); equals the trapezoidal ROC area.
inline std::optional<double> roc_auc(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw error("roc_auc: scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw error("roc_auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average over the tie
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Confusion counts and the derived scores for one evaluation. Undefined
// ratios (empty denominators) are reported as 0 and flagged; AUC is absent
// when only one class is present.
struct MetricsReport {
  double accuracy = 0.0;
  std::optional<double> auc;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t n_samples = 0;
};

inline MetricsReport compute_metrics(const std::vector<double>& probs,
                                     const std::vector<int>& labels, double threshold = 0.5) {
  if (probs.size() != labels.size()) throw error("compute_metrics: probs/labels length mismatch");
  if (probs.empty()) throw error("compute_metrics: empty evaluation set");
  MetricsReport r;
  r.n_samples = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++r.tp;
    else if (pred && !truth) ++r.fp;
    else if (!pred && truth) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.n_samples);
  if (r.tp + r.fp > 0) {
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  } else {
    r.precision_defined = false;
  }
  if (r.tp + r.fn > 0) {
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  } else {
    r.recall_defined = false;
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  r.auc = roc_auc(probs, labels);
  return r;
}

}  // namespace sfgru
