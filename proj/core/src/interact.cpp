#include "fsrec/interact.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace fsrec::interact {

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLinear: return "linear";
    case ClassifierKind::kMlp: return "mlp";
    case ClassifierKind::kCnn: return "cnn";
  }
  throw std::logic_error("unreachable classifier kind");
}

ClassifierKind classifier_kind_from_string(const std::string& name) {
  if (name == "linear") return ClassifierKind::kLinear;
  if (name == "mlp") return ClassifierKind::kMlp;
  if (name == "cnn") return ClassifierKind::kCnn;
  throw std::invalid_argument("unknown classifier kind '" + name + "'");
}

namespace {

std::vector<double> concat_features(const std::vector<double>& user_vec,
                                    const std::vector<double>& item_vec) {
  std::vector<double> features;
  features.reserve(user_vec.size() + item_vec.size());
  features.insert(features.end(), user_vec.begin(), user_vec.end());
  features.insert(features.end(), item_vec.begin(), item_vec.end());
  return features;
}

const std::vector<double>& require_vector(const embed::EmbeddingSet& set,
                                          const std::string& subject_id,
                                          const char* role) {
  const std::vector<double>* vec = set.find(subject_id);
  if (vec == nullptr) {
    throw std::runtime_error(std::string("no ") + role + " embedding for '" +
                             subject_id + "'");
  }
  return *vec;
}

}  // namespace

PairSet build_pairs(const corpus::SplitBundle& splits, const InteractionStore& store,
                    const embed::EmbeddingSet& users, const embed::EmbeddingSet& items,
                    std::uint64_t seed) {
  PairSet out;
  Rng rng(mix_seed(seed, 0x1ABE1));

  // The experiment catalog is whatever the item set covers; negatives are
  // then vetted against the user's full store history.
  std::vector<std::string> catalog;
  catalog.reserve(items.size());
  for (const auto& [item_id, _] : items.vectors()) catalog.push_back(item_id);

  std::map<std::string, std::vector<std::string>> complements;
  auto complement_for = [&](const std::string& user_id) -> const std::vector<std::string>& {
    auto it = complements.find(user_id);
    if (it != complements.end()) return it->second;
    std::unordered_set<std::string> history;
    for (const Interaction* inter : store.user_history(user_id)) {
      history.insert(inter->item_id);
    }
    std::vector<std::string> complement;
    for (const auto& item_id : catalog) {
      if (history.find(item_id) == history.end()) complement.push_back(item_id);
    }
    return complements.emplace(user_id, std::move(complement)).first->second;
  };

  auto emit_pair = [&](std::vector<LabeledPair>& sink, const std::string& user_id,
                       const std::string& item_id) {
    const auto& user_vec = require_vector(users, user_id, "user");
    const auto& item_vec = require_vector(items, item_id, "item");
    sink.push_back({user_id, item_id, concat_features(user_vec, item_vec), 1});
    const auto& complement = complement_for(user_id);
    if (complement.empty()) {
      ++out.skipped_negatives;
      out.warnings.push_back("user '" + user_id +
                             "' has interacted with the whole catalog; negative skipped");
      return;
    }
    const std::string& negative = complement[rng.next_below(complement.size())];
    sink.push_back({user_id, negative,
                    concat_features(user_vec, require_vector(items, negative, "item")), 0});
  };

  for (const auto& [user_id, train] : splits.user_train) {
    for (const auto& interaction : train) {
      emit_pair(out.train, user_id, interaction.item_id);
    }
  }
  for (const auto& [user_id, heldout] : splits.test) {
    emit_pair(out.test, user_id, heldout.item_id);
  }
  return out;
}

ClassifierRun train_eval_classifier(ClassifierKind kind, const PairSet& pairs,
                                    const nn::OptimizerConfig& config,
                                    const ClassifierOptions& options) {
  if (pairs.train.empty() || pairs.test.empty()) {
    throw std::invalid_argument("classifier needs nonempty train and test pairs");
  }
  const std::size_t dim = pairs.train.front().features.size();

  nn::NetworkSpec spec;
  switch (kind) {
    case ClassifierKind::kLinear:
      spec = nn::linear_classifier_spec(dim, config.seed);
      break;
    case ClassifierKind::kMlp:
      spec = nn::mlp_classifier_spec(dim, config.seed, options.mlp_hidden);
      break;
    case ClassifierKind::kCnn:
      spec = nn::cnn_classifier_spec(dim, config.seed);
      break;
  }
  nn::Network net(spec);

  std::vector<std::vector<double>> train_features;
  std::vector<double> train_labels;
  train_features.reserve(pairs.train.size());
  train_labels.reserve(pairs.train.size());
  for (const auto& pair : pairs.train) {
    train_features.push_back(pair.features);
    train_labels.push_back(static_cast<double>(pair.label));
  }

  ClassifierRun run;
  run.kind = kind;
  run.training = nn::train_epochs(net, train_features, train_labels, config);

  std::vector<std::vector<double>> test_features;
  std::vector<int> test_labels;
  test_features.reserve(pairs.test.size());
  test_labels.reserve(pairs.test.size());
  for (const auto& pair : pairs.test) {
    test_features.push_back(pair.features);
    test_labels.push_back(pair.label);
  }
  std::vector<double> scores = nn::predict(net, test_features);
  std::vector<int> predictions(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    predictions[i] = scores[i] > 0.5 ? 1 : 0;
  }
  run.metrics = metrics::classification_metrics(predictions, test_labels);
  return run;
}

}  // namespace fsrec::interact
