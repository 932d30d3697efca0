#include "fsrec/metrics.hpp"

#include <stdexcept>
#include <string>

namespace fsrec::metrics {

ClassificationMetrics classification_metrics(const std::vector<int>& predictions,
                                             const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw std::invalid_argument("predictions and labels must have equal nonzero length");
  }
  ClassificationMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    int p = predictions[i];
    int y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) {
      throw std::invalid_argument("predictions and labels must be 0 or 1 at index " +
                                  std::to_string(i));
    }
    if (p == 1 && y == 1) ++m.tp;
    else if (p == 1 && y == 0) ++m.fp;
    else if (p == 0 && y == 0) ++m.tn;
    else ++m.fn;
  }
  const double total = static_cast<double>(predictions.size());
  m.accuracy = static_cast<double>(m.tp + m.tn) / total;

  if (m.tp + m.fp == 0) {
    m.precision = 0.0;
    m.zero_division = true;
  } else {
    m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  if (m.tp + m.fn == 0) {
    m.recall = 0.0;
    m.zero_division = true;
  } else {
    m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1 = 0.0;
    m.zero_division = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  m.degenerate = (m.tp + m.fp == 0) || (m.tn + m.fn == 0);
  return m;
}

RankingMetrics ranking_metrics(const std::vector<std::size_t>& ranks,
                               const std::vector<std::size_t>& k_list) {
  if (ranks.empty()) throw std::invalid_argument("ranking metrics need at least one user");
  if (k_list.empty()) throw std::invalid_argument("k list must be nonempty");
  for (std::size_t r : ranks) {
    if (r < 1) throw std::invalid_argument("ranks are 1-based");
  }
  RankingMetrics m;
  m.k_list = k_list;
  m.n_users = ranks.size();
  const double n = static_cast<double>(ranks.size());
  for (std::size_t k : k_list) {
    std::size_t hits = 0;
    double reciprocal_sum = 0.0;
    for (std::size_t r : ranks) {
      if (r <= k) {
        ++hits;
        reciprocal_sum += 1.0 / static_cast<double>(r);
      }
    }
    m.hr[k] = static_cast<double>(hits) / n;
    m.mrr[k] = reciprocal_sum / n;
  }
  return m;
}

}  // namespace fsrec::metrics
