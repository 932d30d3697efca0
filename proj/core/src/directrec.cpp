#include "fsrec/directrec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fsrec::directrec {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBprMf: return "bpr-mf";
    case ModelKind::kNcfLinear: return "ncf-linear";
    case ModelKind::kNcfMlp: return "ncf-mlp";
    case ModelKind::kNcfCnn: return "ncf-cnn";
  }
  throw std::logic_error("unreachable model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "bpr-mf") return ModelKind::kBprMf;
  if (name == "ncf-linear") return ModelKind::kNcfLinear;
  if (name == "ncf-mlp") return ModelKind::kNcfMlp;
  if (name == "ncf-cnn") return ModelKind::kNcfCnn;
  throw std::invalid_argument("unknown ranking model kind '" + name + "'");
}

bool is_ncf(ModelKind kind) { return kind != ModelKind::kBprMf; }

InjectionMode random_mode() { return {InjectionMode::Source::kRandom, true}; }
InjectionMode fixed_mode() { return {InjectionMode::Source::kInjected, false}; }
InjectionMode finetuned_mode() { return {InjectionMode::Source::kInjected, true}; }

std::string to_string(const InjectionMode& mode) {
  if (mode.source == InjectionMode::Source::kRandom) return "random";
  return mode.trainable ? "fine-tuned" : "fixed";
}

InjectionMode injection_mode_from_string(const std::string& name) {
  if (name == "random") return random_mode();
  if (name == "fixed") return fixed_mode();
  if (name == "fine-tuned" || name == "finetuned") return finetuned_mode();
  throw std::invalid_argument("unknown injection mode '" + name + "'");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -ln sigmoid(x), stable for large |x|.
double softplus_neg(double x) {
  if (x > 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

double table_sum(const std::vector<std::vector<double>>& table) {
  double s = 0.0;
  for (const auto& row : table) {
    for (double v : row) s += v;
  }
  return s;
}

std::vector<double> concat_rows(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

constexpr std::uint64_t kTableSalt = 0x7461626C;   // "tabl"
constexpr std::uint64_t kTowerSalt = 0x746F7772;   // "towr"
constexpr std::uint64_t kNegSalt = 0x6E656773;     // "negs"
constexpr std::uint64_t kOrderSalt = 0x6F726472;   // "ordr"

}  // namespace

double RankingModel::score(std::size_t user_idx, std::size_t item_idx) {
  const auto& u = user_table[user_idx];
  const auto& i = item_table[item_idx];
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) s += u[k] * i[k];
  if (!item_bias.empty()) s += item_bias[item_idx];
  return s;
}

RankingModel init_model(ModelKind kind, const corpus::SplitBundle& splits,
                        const embed::EmbeddingSet* user_emb,
                        const embed::EmbeddingSet* item_emb, InjectionMode mode,
                        std::uint64_t seed, const ModelOptions& options) {
  if (mode.source == InjectionMode::Source::kRandom && !mode.trainable) {
    throw std::invalid_argument("random-source tables must be trainable");
  }
  RankingModel model;
  model.kind = kind;
  model.mode = mode;
  model.options = options;

  for (const auto& [user_id, _] : splits.user_train) model.user_ids.push_back(user_id);
  model.item_ids = splits.referenced_items();
  for (std::size_t i = 0; i < model.user_ids.size(); ++i) {
    model.user_index[model.user_ids[i]] = i;
  }
  for (std::size_t i = 0; i < model.item_ids.size(); ++i) {
    model.item_index[model.item_ids[i]] = i;
  }
  if (model.user_ids.empty() || model.item_ids.empty()) {
    throw std::invalid_argument("splits contain no users or no items");
  }

  if (mode.source == InjectionMode::Source::kRandom) {
    model.dim = options.random_dim;
    if (model.dim == 0) throw std::invalid_argument("random_dim must be positive");
    Rng rng(mix_seed(seed, kTableSalt));
    auto draw_table = [&](std::size_t rows) {
      std::vector<std::vector<double>> table(rows, std::vector<double>(model.dim));
      for (auto& row : table) {
        for (double& v : row) v = rng.next_double(-0.01, 0.01);
      }
      return table;
    };
    model.user_table = draw_table(model.user_ids.size());
    model.item_table = draw_table(model.item_ids.size());
  } else {
    if (user_emb == nullptr || item_emb == nullptr) {
      throw std::invalid_argument("injected mode requires user and item embedding sets");
    }
    if (user_emb->dimension() != item_emb->dimension()) {
      throw std::invalid_argument("user and item embedding dimensions differ");
    }
    model.dim = user_emb->dimension();
    std::vector<std::string> missing;
    model.user_table.reserve(model.user_ids.size());
    for (const auto& user_id : model.user_ids) {
      const auto* vec = user_emb->find(user_id);
      if (vec == nullptr) missing.push_back("user:" + user_id);
      else model.user_table.push_back(*vec);
    }
    model.item_table.reserve(model.item_ids.size());
    for (const auto& item_id : model.item_ids) {
      const auto* vec = item_emb->find(item_id);
      if (vec == nullptr) missing.push_back("item:" + item_id);
      else model.item_table.push_back(*vec);
    }
    if (!missing.empty()) {
      std::string message = "injected embeddings missing " +
                            std::to_string(missing.size()) + " subjects:";
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
        message += " " + missing[i];
      }
      if (missing.size() > 10) message += " ...";
      throw std::runtime_error(message);
    }
  }

  if (kind == ModelKind::kBprMf && options.bpr_item_bias) {
    model.item_bias.assign(model.item_ids.size(), 0.0);
  }

  if (is_ncf(kind)) {
    std::uint64_t tower_seed = mix_seed(seed, kTowerSalt);
    nn::NetworkSpec tower_spec;
    switch (kind) {
      case ModelKind::kNcfLinear:
        tower_spec = nn::linear_classifier_spec(2 * model.dim, tower_seed);
        break;
      case ModelKind::kNcfMlp:
        tower_spec = nn::mlp_classifier_spec(2 * model.dim, tower_seed, options.mlp_hidden);
        break;
      case ModelKind::kNcfCnn:
        tower_spec = nn::cnn_classifier_spec(2 * model.dim, tower_seed);
        break;
      case ModelKind::kBprMf:
        break;
    }
    model.tower = std::make_unique<nn::Network>(tower_spec);
  }

  // Interaction strength is neutralized: every observed (user, item) counts
  // as the uniform constant 1, ratings never enter training.
  model.user_train_items.resize(model.user_ids.size());
  for (const auto& [user_id, train] : splits.user_train) {
    std::size_t u = model.user_index.at(user_id);
    for (const auto& interaction : train) {
      auto it = model.item_index.find(interaction.item_id);
      if (it == model.item_index.end()) {
        throw std::runtime_error("train item '" + interaction.item_id +
                                 "' missing from the item catalog");
      }
      model.train_pairs.emplace_back(u, it->second);
      model.user_train_items[u].push_back(it->second);
    }
  }
  for (auto& items : model.user_train_items) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return model;
}

namespace {

// Uniform item index outside the user's train items; nullopt when the user
// has trained on the whole catalog.
std::optional<std::size_t> sample_negative(const RankingModel& model, std::size_t user_idx,
                                           Rng& rng) {
  const auto& exclude = model.user_train_items[user_idx];
  if (exclude.size() >= model.item_ids.size()) return std::nullopt;
  for (;;) {
    std::size_t candidate = static_cast<std::size_t>(
        rng.next_below(static_cast<std::uint64_t>(model.item_ids.size())));
    if (!std::binary_search(exclude.begin(), exclude.end(), candidate)) {
      return candidate;
    }
  }
}

}  // namespace

nn::TrainResult bpr_train(RankingModel& model, const nn::OptimizerConfig& config) {
  if (model.kind != ModelKind::kBprMf) {
    throw std::invalid_argument("bpr_train requires a bpr-mf model");
  }
  config.validate();
  if (model.train_pairs.empty()) {
    throw std::invalid_argument("no training pairs");
  }
  const double lr = config.learning_rate;
  const double lambda = model.options.bpr_lambda;
  const bool trainable = model.mode.trainable;

  Rng order_rng(mix_seed(config.seed, kOrderSalt));
  Rng neg_rng(mix_seed(config.seed, kNegSalt));
  std::vector<std::size_t> order(model.train_pairs.size());
  std::iota(order.begin(), order.end(), 0);

  nn::TrainResult result;
  std::vector<double> u_old(model.dim);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t triples = 0;
    for (std::size_t idx : order) {
      auto [u, i] = model.train_pairs[idx];
      auto j_opt = sample_negative(model, u, neg_rng);
      if (!j_opt.has_value()) continue;
      std::size_t j = *j_opt;

      double x = model.score(u, i) - model.score(u, j);
      loss_sum += softplus_neg(x);
      ++triples;
      double scale = sigmoid(-x);

      auto& u_row = model.user_table[u];
      auto& i_row = model.item_table[i];
      auto& j_row = model.item_table[j];
      if (trainable) {
        std::copy(u_row.begin(), u_row.end(), u_old.begin());
        for (std::size_t k = 0; k < model.dim; ++k) {
          u_row[k] += lr * (scale * (i_row[k] - j_row[k]) - lambda * u_row[k]);
          i_row[k] += lr * (scale * u_old[k] - lambda * i_row[k]);
          j_row[k] += lr * (-scale * u_old[k] - lambda * j_row[k]);
        }
      }
      if (!model.item_bias.empty()) {
        // The bias trains in every mode; it exists so frozen tables still
        // leave a learnable popularity signal.
        model.item_bias[i] += lr * (scale - lambda * model.item_bias[i]);
        model.item_bias[j] += lr * (-scale - lambda * model.item_bias[j]);
      }
    }
    double epoch_loss = triples == 0 ? 0.0 : loss_sum / static_cast<double>(triples);
    result.epoch_losses.push_back(epoch_loss);
    result.epochs_run = epoch + 1;

    double health = table_sum(model.user_table) + table_sum(model.item_table);
    for (double b : model.item_bias) health += b;
    if (!std::isfinite(epoch_loss) || !std::isfinite(health)) {
      result.diverged = true;
      result.divergence_reason = "non-finite loss or tables at epoch " +
                                 std::to_string(epoch + 1);
      return result;
    }
  }
  if (!result.epoch_losses.empty() &&
      result.epoch_losses.back() > nn::kRunawayLossThreshold) {
    result.diverged = true;
    result.divergence_reason = "final epoch loss " +
                               std::to_string(result.epoch_losses.back()) +
                               " exceeds runaway threshold " +
                               std::to_string(nn::kRunawayLossThreshold);
  }
  return result;
}

nn::TrainResult ncf_train(RankingModel& model, const nn::OptimizerConfig& config,
                          std::size_t neg_per_pos) {
  if (!is_ncf(model.kind) || model.tower == nullptr) {
    throw std::invalid_argument("ncf_train requires an NCF model with a tower");
  }
  config.validate();
  if (model.train_pairs.empty()) {
    throw std::invalid_argument("no training pairs");
  }
  const bool tables_trainable = model.mode.trainable;
  const double lr = config.learning_rate;
  const std::size_t channels = model.tower->input_channels();

  nn::SgdOptimizer tower_optimizer(config, model.tower->parameters());
  Rng order_rng(mix_seed(config.seed, kOrderSalt));
  Rng neg_rng(mix_seed(config.seed, kNegSalt));

  struct Example {
    std::size_t user_idx;
    std::size_t item_idx;
    double label;
  };

  nn::TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Fresh negatives every epoch.
    std::vector<Example> examples;
    examples.reserve(model.train_pairs.size() * (1 + neg_per_pos));
    for (const auto& [u, i] : model.train_pairs) {
      examples.push_back({u, i, 1.0});
      for (std::size_t n = 0; n < neg_per_pos; ++n) {
        auto j = sample_negative(model, u, neg_rng);
        if (j.has_value()) examples.push_back({u, *j, 0.0});
      }
    }
    order_rng.shuffle(examples);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += config.batch_size) {
      std::size_t end = std::min(examples.size(), start + config.batch_size);
      std::size_t batch = end - start;

      std::vector<double> values;
      values.reserve(batch * 2 * model.dim);
      std::vector<double> labels(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto& ex = examples[start + b];
        const auto& u_row = model.user_table[ex.user_idx];
        const auto& i_row = model.item_table[ex.item_idx];
        values.insert(values.end(), u_row.begin(), u_row.end());
        values.insert(values.end(), i_row.begin(), i_row.end());
        labels[b] = ex.label;
      }
      nn::Tensor input =
          channels > 0
              ? nn::Tensor({batch, channels, 2 * model.dim / channels}, std::move(values))
              : nn::Tensor({batch, 2 * model.dim}, std::move(values));

      tower_optimizer.zero_grads();
      nn::Tensor output = model.tower->forward(input, /*train=*/true);
      nn::LossResult loss = nn::bce_loss(output.values, labels);
      loss_sum += loss.loss * static_cast<double>(batch);
      nn::Tensor grad_in = model.tower->backward(nn::Tensor(output.shape, loss.grad));
      tower_optimizer.step();

      if (tables_trainable) {
        // Plain SGD on the embedding rows from the tower's input gradient.
        for (std::size_t b = 0; b < batch; ++b) {
          const auto& ex = examples[start + b];
          const double* g = grad_in.values.data() + b * 2 * model.dim;
          auto& u_row = model.user_table[ex.user_idx];
          auto& i_row = model.item_table[ex.item_idx];
          for (std::size_t k = 0; k < model.dim; ++k) {
            u_row[k] -= lr * g[k];
            i_row[k] -= lr * g[model.dim + k];
          }
        }
      }
    }
    double epoch_loss = examples.empty() ? 0.0
                                         : loss_sum / static_cast<double>(examples.size());
    result.epoch_losses.push_back(epoch_loss);
    result.epochs_run = epoch + 1;

    double health = model.tower->parameter_sum();
    if (tables_trainable) {
      health += table_sum(model.user_table) + table_sum(model.item_table);
    }
    if (!std::isfinite(epoch_loss) || !std::isfinite(health)) {
      result.diverged = true;
      result.divergence_reason = "non-finite loss or parameters at epoch " +
                                 std::to_string(epoch + 1);
      return result;
    }
  }
  if (!result.epoch_losses.empty() &&
      result.epoch_losses.back() > nn::kRunawayLossThreshold) {
    result.diverged = true;
    result.divergence_reason = "final epoch loss " +
                               std::to_string(result.epoch_losses.back()) +
                               " exceeds runaway threshold " +
                               std::to_string(nn::kRunawayLossThreshold);
  }
  return result;
}

namespace {

std::vector<double> score_candidates(RankingModel& model, std::size_t user_idx,
                                     const std::vector<std::size_t>& candidate_idx) {
  if (!is_ncf(model.kind)) {
    std::vector<double> scores(candidate_idx.size());
    for (std::size_t c = 0; c < candidate_idx.size(); ++c) {
      scores[c] = model.score(user_idx, candidate_idx[c]);
    }
    return scores;
  }
  std::vector<std::vector<double>> features;
  features.reserve(candidate_idx.size());
  const auto& u_row = model.user_table[user_idx];
  for (std::size_t idx : candidate_idx) {
    features.push_back(concat_rows(u_row, model.item_table[idx]));
  }
  return nn::predict(*model.tower, features);
}

}  // namespace

RankedList rank(RankingModel& model, const std::string& user_id,
                const std::vector<std::string>& candidates) {
  auto user_it = model.user_index.find(user_id);
  if (user_it == model.user_index.end()) {
    throw std::invalid_argument("unknown user '" + user_id + "'");
  }
  std::vector<std::size_t> candidate_idx;
  candidate_idx.reserve(candidates.size());
  for (const auto& item_id : candidates) {
    auto it = model.item_index.find(item_id);
    if (it == model.item_index.end()) {
      throw std::invalid_argument("unknown item '" + item_id + "'");
    }
    candidate_idx.push_back(it->second);
  }
  std::vector<double> scores = score_candidates(model, user_it->second, candidate_idx);

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });

  RankedList out;
  out.user_id = user_id;
  out.item_ids.reserve(candidates.size());
  out.scores.reserve(candidates.size());
  for (std::size_t idx : order) {
    out.item_ids.push_back(candidates[idx]);
    out.scores.push_back(scores[idx]);
  }
  return out;
}

CandidatePolicy CandidatePolicy::parse(const std::string& text) {
  CandidatePolicy policy;
  if (text == "full") {
    policy.kind = Kind::kFullCatalog;
    return policy;
  }
  if (text.rfind("sampled:", 0) == 0) {
    policy.kind = Kind::kSampled;
    policy.sample_size = static_cast<std::size_t>(std::stoull(text.substr(8)));
    if (policy.sample_size == 0) {
      throw std::invalid_argument("sampled candidate count must be positive");
    }
    return policy;
  }
  throw std::invalid_argument("candidate policy must be 'full' or 'sampled:N'");
}

std::string CandidatePolicy::to_string() const {
  if (kind == Kind::kFullCatalog) return "full";
  return "sampled:" + std::to_string(sample_size);
}

RankingEvaluation evaluate(RankingModel& model, const corpus::SplitBundle& splits,
                           const std::vector<std::size_t>& k_list,
                           CandidatePolicy policy, std::uint64_t seed) {
  if (splits.test.empty()) throw std::invalid_argument("empty test split");

  RankingEvaluation out;
  out.policy = policy.to_string();
  std::vector<std::size_t> ranks;
  ranks.reserve(splits.test.size());

  for (const auto& [user_id, heldout] : splits.test) {
    auto user_it = model.user_index.find(user_id);
    if (user_it == model.user_index.end()) {
      throw std::runtime_error("test user '" + user_id + "' unknown to the model");
    }
    std::size_t user_idx = user_it->second;
    auto gt_it = model.item_index.find(heldout.item_id);
    if (gt_it == model.item_index.end()) {
      throw std::runtime_error("ground-truth item '" + heldout.item_id +
                               "' unknown to the model");
    }
    std::size_t gt_idx = gt_it->second;

    const auto& exclude = model.user_train_items[user_idx];
    std::vector<std::size_t> candidate_idx;
    if (policy.kind == CandidatePolicy::Kind::kFullCatalog) {
      candidate_idx.reserve(model.item_ids.size());
      for (std::size_t idx = 0; idx < model.item_ids.size(); ++idx) {
        // Training items leave the candidate pool, but never the ground
        // truth (a user may re-interact with an item they trained on).
        if (idx != gt_idx && std::binary_search(exclude.begin(), exclude.end(), idx)) {
          continue;
        }
        candidate_idx.push_back(idx);
      }
    } else {
      candidate_idx.push_back(gt_idx);
      Rng rng(mix_seed(seed, user_idx));
      std::size_t excluded = exclude.size() +
                             (std::binary_search(exclude.begin(), exclude.end(), gt_idx)
                                  ? 0
                                  : 1);
      std::size_t available = model.item_ids.size() - excluded;
      std::size_t want = std::min(policy.sample_size, available);
      while (candidate_idx.size() < want + 1) {
        std::size_t idx = static_cast<std::size_t>(
            rng.next_below(static_cast<std::uint64_t>(model.item_ids.size())));
        if (idx == gt_idx) continue;
        if (std::binary_search(exclude.begin(), exclude.end(), idx)) continue;
        if (std::find(candidate_idx.begin(), candidate_idx.end(), idx) !=
            candidate_idx.end()) {
          continue;
        }
        candidate_idx.push_back(idx);
      }
    }

    bool has_gt = std::find(candidate_idx.begin(), candidate_idx.end(), gt_idx) !=
                  candidate_idx.end();
    if (!has_gt) {
      throw std::logic_error("candidate policy dropped the ground-truth item");
    }

    std::vector<double> scores = score_candidates(model, user_idx, candidate_idx);
    double gt_score = 0.0;
    const std::string& gt_id = model.item_ids[gt_idx];
    for (std::size_t c = 0; c < candidate_idx.size(); ++c) {
      if (candidate_idx[c] == gt_idx) {
        gt_score = scores[c];
        break;
      }
    }
    // 1-based rank by linear scan, ties resolved by item-id order to match
    // rank()'s sort.
    std::size_t rank_of_gt = 1;
    for (std::size_t c = 0; c < candidate_idx.size(); ++c) {
      if (candidate_idx[c] == gt_idx) continue;
      if (scores[c] > gt_score ||
          (scores[c] == gt_score && model.item_ids[candidate_idx[c]] < gt_id)) {
        ++rank_of_gt;
      }
    }
    ranks.push_back(rank_of_gt);
    out.user_ranks.emplace_back(user_id, rank_of_gt);
  }

  out.metrics = metrics::ranking_metrics(ranks, k_list);
  return out;
}

}  // namespace fsrec::directrec
