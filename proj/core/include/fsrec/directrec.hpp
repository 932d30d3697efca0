#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsrec/corpus.hpp"
#include "fsrec/embed.hpp"
#include "fsrec/metrics.hpp"
#include "fsrec/trainer.hpp"

namespace fsrec::directrec {

enum class ModelKind { kBprMf, kNcfLinear, kNcfMlp, kNcfCnn };
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
bool is_ncf(ModelKind kind);

// random source implies trainable tables (the conventional baseline);
// injected+frozen is "fixed", injected+trainable is "fine-tuned".
struct InjectionMode {
  enum class Source { kRandom, kInjected };
  Source source = Source::kRandom;
  bool trainable = true;
};
InjectionMode random_mode();
InjectionMode fixed_mode();
InjectionMode finetuned_mode();
std::string to_string(const InjectionMode& mode);  // random|fixed|fine-tuned
InjectionMode injection_mode_from_string(const std::string& name);

struct ModelOptions {
  std::size_t random_dim = 64;  // table width when source is random
  std::vector<std::size_t> mlp_hidden = {256, 64};
  // BPR L2 regularization strength.
  double bpr_lambda = 0.01;
  // Optional trainable per-item bias for BPR. Off by default; turning it on
  // gives the fixed mode something to learn (a per-user bias would cancel
  // inside the pairwise score difference).
  bool bpr_item_bias = false;
};

struct RankingModel {
  ModelKind kind = ModelKind::kBprMf;
  InjectionMode mode;
  std::size_t dim = 0;
  std::vector<std::string> user_ids;  // sorted; row order of user_table
  std::vector<std::string> item_ids;  // sorted; row order of item_table
  std::map<std::string, std::size_t> user_index;
  std::map<std::string, std::size_t> item_index;
  std::vector<std::vector<double>> user_table;
  std::vector<std::vector<double>> item_table;
  std::vector<double> item_bias;  // used only when options.bpr_item_bias
  std::unique_ptr<nn::Network> tower;  // NCF kinds only
  ModelOptions options;

  // Positive training pairs as table indices, built from the splits.
  std::vector<std::pair<std::size_t, std::size_t>> train_pairs;
  // Per user, the set of train item indices (negative-sampling exclusion).
  std::vector<std::vector<std::size_t>> user_train_items;  // sorted vectors

  double score(std::size_t user_idx, std::size_t item_idx);  // BPR dot(+bias)
};

// Builds tables over the cohort users and the full referenced item catalog.
// Random mode draws uniform(-0.01, 0.01) from the seed; injected mode
// copies embedding rows and fails fast listing any uncovered subject.
// Interaction weights are neutralized to the uniform constant 1.
RankingModel init_model(ModelKind kind, const corpus::SplitBundle& splits,
                        const embed::EmbeddingSet* user_emb,
                        const embed::EmbeddingSet* item_emb, InjectionMode mode,
                        std::uint64_t seed, const ModelOptions& options = {});

// Pairwise ranking: per positive (u,i), sample j uniformly outside the
// user's train items and ascend ln sigmoid(score(u,i)-score(u,j)) with L2
// regularization. Only trainable tables move. Loss trace is the mean
// -ln sigmoid(x) per epoch.
nn::TrainResult bpr_train(RankingModel& model, const nn::OptimizerConfig& config);

// Pointwise NCF: tower scores concat(user_row, item_row); positives label
// 1, neg_per_pos fresh negatives per epoch label 0, mean BCE. The tower
// always trains; tables only in trainable modes.
nn::TrainResult ncf_train(RankingModel& model, const nn::OptimizerConfig& config,
                          std::size_t neg_per_pos = 4);

struct RankedList {
  std::string user_id;
  std::vector<std::string> item_ids;  // descending score, ties by item id
  std::vector<double> scores;         // aligned with item_ids
};

// Scores and fully sorts the candidate list. Unknown ids are fatal.
RankedList rank(RankingModel& model, const std::string& user_id,
                const std::vector<std::string>& candidates);

struct CandidatePolicy {
  enum class Kind { kFullCatalog, kSampled };
  Kind kind = Kind::kFullCatalog;
  std::size_t sample_size = 0;  // negatives added next to the ground truth
  static CandidatePolicy parse(const std::string& text);  // "full"|"sampled:N"
  std::string to_string() const;
};

struct RankingEvaluation {
  metrics::RankingMetrics metrics;
  std::vector<std::pair<std::string, std::size_t>> user_ranks;  // 1-based
  std::string policy;
};

// Ranks each test user's candidates (full catalog minus that user's train
// items, or ground truth plus sampled negatives) and scores the held-out
// item's rank. Ground truth missing from the candidate set is fatal.
RankingEvaluation evaluate(RankingModel& model, const corpus::SplitBundle& splits,
                           const std::vector<std::size_t>& k_list,
                           CandidatePolicy policy = {}, std::uint64_t seed = 0);

}  // namespace fsrec::directrec
