#include "fsrec/semdist.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "jsonl_util.hpp"

namespace fsrec::semdist {

using detail::ordered_json;

void CompensatedSum::add(double v) {
  double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    compensation_ += (sum_ - t) + v;
  } else {
    compensation_ += (v - t) + sum_;
  }
  sum_ = t;
}

namespace {

void require_same_length(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("distance operands differ in dimension: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
}

}  // namespace

double manhattan_distance(const std::vector<double>& a, const std::vector<double>& b) {
  require_same_length(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
  require_same_length(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

std::optional<double> cosine_similarity(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  require_same_length(a, b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  // Identical vectors accumulate identical sums; return 1 exactly rather
  // than sqrt-rounding away from it.
  if (na == nb && dot == na) return 1.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

DistanceReport compare_sets(const embed::EmbeddingSet& a, const embed::EmbeddingSet& b,
                            bool keep_breakdown) {
  if (a.dimension() != b.dimension()) {
    throw std::invalid_argument("embedding sets differ in dimension: " +
                                std::to_string(a.dimension()) + " vs " +
                                std::to_string(b.dimension()));
  }
  DistanceReport report;
  report.d = a.dimension();

  CompensatedSum manhattan_sum, euclidean_sum, cosine_sum;
  for (const auto& [subject_id, va] : a.vectors()) {
    const std::vector<double>* vb = b.find(subject_id);
    if (vb == nullptr) {
      report.skipped_subjects.push_back(subject_id);
      continue;
    }
    PairBreakdown pair;
    pair.subject_id = subject_id;
    pair.manhattan = manhattan_distance(va, *vb);
    pair.euclidean = euclidean_distance(va, *vb);
    pair.cosine = cosine_similarity(va, *vb);

    manhattan_sum.add(pair.manhattan);
    euclidean_sum.add(pair.euclidean);
    if (pair.cosine.has_value()) {
      cosine_sum.add(*pair.cosine);
      ++report.cosine_pairs_used;
    } else {
      ++report.zero_vector_pairs;
    }
    ++report.n;
    if (keep_breakdown) report.per_subject.push_back(std::move(pair));
  }
  for (const auto& [subject_id, vb] : b.vectors()) {
    if (a.find(subject_id) == nullptr) report.skipped_subjects.push_back(subject_id);
  }
  std::sort(report.skipped_subjects.begin(), report.skipped_subjects.end());

  if (report.n == 0) {
    throw std::runtime_error("embedding sets share no subject ids");
  }
  if (report.cosine_pairs_used == 0) {
    throw std::runtime_error("every compared pair has a zero vector; cosine undefined");
  }
  report.mean_manhattan = manhattan_sum.value() / static_cast<double>(report.n);
  report.mean_euclidean = euclidean_sum.value() / static_cast<double>(report.n);
  report.mean_cosine = cosine_sum.value() / static_cast<double>(report.cosine_pairs_used);
  return report;
}

namespace {

ordered_json report_to_json(const DistanceReport& report) {
  ordered_json out;
  out["n"] = report.n;
  out["d"] = report.d;
  out["mean_manhattan"] = report.mean_manhattan;
  out["mean_euclidean"] = report.mean_euclidean;
  out["mean_cosine"] = report.mean_cosine;
  out["cosine_pairs_used"] = report.cosine_pairs_used;
  out["zero_vector_pairs"] = report.zero_vector_pairs;
  out["skipped_subjects"] = report.skipped_subjects;
  if (!report.per_subject.empty()) {
    ordered_json rows = ordered_json::array();
    for (const auto& pair : report.per_subject) {
      ordered_json row;
      row["subject_id"] = pair.subject_id;
      row["manhattan"] = pair.manhattan;
      row["euclidean"] = pair.euclidean;
      if (pair.cosine.has_value()) {
        row["cosine"] = *pair.cosine;
      } else {
        row["cosine"] = nullptr;
      }
      rows.push_back(std::move(row));
    }
    out["per_subject"] = std::move(rows);
  }
  return out;
}

ordered_json reference_to_json(const ReferenceMeans& ref) {
  ordered_json out;
  out["mean_cosine"] = ref.cosine;
  out["mean_euclidean"] = ref.euclidean;
  out["mean_manhattan"] = ref.manhattan;
  return out;
}

}  // namespace

void save_report_pair(const DistanceReport& users, const DistanceReport& items,
                      const std::filesystem::path& path) {
  ordered_json out;
  out["users"] = report_to_json(users);
  out["items"] = report_to_json(items);
  ordered_json footer;
  footer["note"] =
      "Reference means from the original ChatGPT+MacBERT Douban experiments, "
      "shown for context only; local embedders are not expected to match them.";
  footer["user"] = reference_to_json(kUserReference);
  footer["item"] = reference_to_json(kItemReference);
  out["reference"] = std::move(footer);
  auto stream = detail::open_output(path);
  stream << out.dump(2) << "\n";
}

}  // namespace fsrec::semdist
