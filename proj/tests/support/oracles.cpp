#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oracle {

double manhattan(const std::vector<double>& a, const std::vector<double>& b) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += std::fabs(static_cast<long double>(a[i]) - static_cast<long double>(b[i]));
  }
  return static_cast<double>(sum);
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
    sum += d * d;
  }
  return static_cast<double>(std::sqrt(sum));
}

std::optional<double> cosine(const std::vector<double>& a,
                             const std::vector<double>& b) {
  long double dot = 0.0L, na = 0.0L, nb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
    na += static_cast<long double>(a[i]) * static_cast<long double>(a[i]);
    nb += static_cast<long double>(b[i]) * static_cast<long double>(b[i]);
  }
  if (na == 0.0L || nb == 0.0L) return std::nullopt;
  long double value = dot / (std::sqrt(na) * std::sqrt(nb));
  if (value > 1.0L) value = 1.0L;
  if (value < -1.0L) value = -1.0L;
  return static_cast<double>(value);
}

Classification classification(const std::vector<int>& predictions,
                              const std::vector<int>& labels) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == 1) {
      labels[i] == 1 ? ++tp : ++fp;
    } else {
      labels[i] == 0 ? ++tn : ++fn;
    }
  }
  Classification m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(predictions.size());
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

double hr_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t r : ranks) {
    if (r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
  double sum = 0.0;
  for (std::size_t r : ranks) {
    if (r <= k) sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

std::size_t rank_by_sort(const std::vector<std::string>& ids,
                         const std::vector<double>& scores, std::size_t target) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (order[pos] == target) return pos + 1;
  }
  throw std::logic_error("rank_by_sort: target index out of range");
}

std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& at, const std::vector<std::size_t>& probe,
    double eps) {
  std::vector<double> grad;
  grad.reserve(probe.size());
  std::vector<double> point = at;
  for (std::size_t i : probe) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double plus = f(point);
    point[i] = saved - eps;
    const double minus = f(point);
    point[i] = saved;
    grad.push_back((plus - minus) / (2.0 * eps));
  }
  return grad;
}

double rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({floor, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace oracle
