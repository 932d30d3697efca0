#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fsrec/embed.hpp"

namespace fsrec::semdist {

// Compensated (Neumaier) accumulator so reduction results are stable to
// 1e-12 regardless of summation order.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

struct PairBreakdown {
  std::string subject_id;
  double manhattan = 0.0;
  double euclidean = 0.0;
  std::optional<double> cosine;  // absent when either vector is all-zero
};

struct DistanceReport {
  std::size_t n = 0;  // paired subjects compared
  std::size_t d = 0;
  double mean_manhattan = 0.0;
  double mean_euclidean = 0.0;
  double mean_cosine = 0.0;       // over pairs with a defined cosine
  std::size_t cosine_pairs_used = 0;
  std::size_t zero_vector_pairs = 0;
  std::vector<std::string> skipped_subjects;  // present in only one set
  std::vector<PairBreakdown> per_subject;     // filled on request
};

double manhattan_distance(const std::vector<double>& a, const std::vector<double>& b);
double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);
// nullopt when either vector has zero norm; exactly 1.0 for identical
// vectors; otherwise clamped to [-1, 1].
std::optional<double> cosine_similarity(const std::vector<double>& a,
                                        const std::vector<double>& b);

// Means of the three measures over the subject-id intersection of two
// equal-dimension sets. Throws on dimension mismatch, empty intersection,
// or when no pair has a defined cosine.
DistanceReport compare_sets(const embed::EmbeddingSet& a, const embed::EmbeddingSet& b,
                            bool keep_breakdown = false);

// Context-only means from the original ChatGPT+MacBERT study, printed in
// the report footer. Local embedders cannot and should not reproduce them.
struct ReferenceMeans {
  double cosine;
  double euclidean;
  double manhattan;
};
inline constexpr ReferenceMeans kUserReference{0.94, 7.62, 194.09};
inline constexpr ReferenceMeans kItemReference{0.95, 6.84, 174.87};

// Writes {"users": ..., "items": ..., "reference": ...} JSON.
void save_report_pair(const DistanceReport& users, const DistanceReport& items,
                      const std::filesystem::path& path);

}  // namespace fsrec::semdist
