#pragma once

#include <cstddef>
#include <map>
#include <vector>

namespace fsrec::metrics {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;  // computed for f1, not reported downstream
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  // True when the predictor emitted only one class.
  bool degenerate = false;
  // True when precision or f1 hit the 0/0 convention.
  bool zero_division = false;
};

// Exact confusion-matrix arithmetic over {0,1} predictions and labels.
// precision and f1 use the 0/0 -> 0 convention, flagged.
ClassificationMetrics classification_metrics(const std::vector<int>& predictions,
                                             const std::vector<int>& labels);

struct RankingMetrics {
  std::vector<std::size_t> k_list;
  std::map<std::size_t, double> hr;   // k -> fraction of users with rank <= k
  std::map<std::size_t, double> mrr;  // k -> mean of 1/rank truncated at k
  std::size_t n_users = 0;
};

// ranks holds the 1-based rank of each user's ground-truth item.
RankingMetrics ranking_metrics(const std::vector<std::size_t>& ranks,
                               const std::vector<std::size_t>& k_list);

}  // namespace fsrec::metrics
