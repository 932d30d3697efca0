#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsrec/corpus.hpp"
#include "fsrec/embed.hpp"
#include "fsrec/metrics.hpp"
#include "fsrec/trainer.hpp"

namespace fsrec::interact {

struct LabeledPair {
  std::string user_id;
  std::string item_id;
  std::vector<double> features;  // user vector then item vector, length 2d
  int label = 0;                 // 1 observed interaction, 0 sampled negative
};

struct PairSet {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> test;
  std::size_t skipped_negatives = 0;  // users with no non-interacted item left
  std::vector<std::string> warnings;
};

// One positive per train interaction and per held-out test interaction,
// each matched with one negative sampled uniformly from items the user
// never interacted with anywhere in the full store. Balanced by
// construction except when a user exhausted the catalog.
// Throws when an embedding vector is missing for a referenced subject.
PairSet build_pairs(const corpus::SplitBundle& splits, const InteractionStore& store,
                    const embed::EmbeddingSet& users, const embed::EmbeddingSet& items,
                    std::uint64_t seed);

enum class ClassifierKind { kLinear, kMlp, kCnn };
std::string to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(const std::string& name);

struct ClassifierRun {
  ClassifierKind kind = ClassifierKind::kLinear;
  metrics::ClassificationMetrics metrics;  // on test pairs, threshold 0.5
  nn::TrainResult training;
};

struct ClassifierOptions {
  std::vector<std::size_t> mlp_hidden = {256, 64};
};

// Trains the requested classifier on train pairs and scores test pairs,
// predicting label 1 iff the network output exceeds 0.5. Divergence is
// recorded in the result, not thrown, so grids can keep going.
ClassifierRun train_eval_classifier(ClassifierKind kind, const PairSet& pairs,
                                    const nn::OptimizerConfig& config,
                                    const ClassifierOptions& options = {});

}  // namespace fsrec::interact
