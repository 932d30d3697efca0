// Release gate. Each numbered criterion runs as one self-contained check
// and prints a single PASS/FAIL line with its wall-clock budget; details of
// any failure go to stderr. Run without arguments for the full gate, or
// pass criterion numbers to run a subset.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fsrec/corpus.hpp"
#include "fsrec/directrec.hpp"
#include "fsrec/embed.hpp"
#include "fsrec/harness.hpp"
#include "fsrec/metrics.hpp"
#include "fsrec/network.hpp"
#include "fsrec/prompt.hpp"
#include "fsrec/repgen.hpp"
#include "fsrec/rng.hpp"
#include "fsrec/semdist.hpp"
#include "fsrec/trainer.hpp"

#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

namespace {

using namespace fsrec;

std::string formatf(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

struct Checker {
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }

  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::fabs(got - want) <= tol)) {
      failures.push_back(formatf("%s: got %.17g, want %.17g (tolerance %g)",
                                 what.c_str(), got, want, tol));
    }
  }
};

std::filesystem::path fixture_path() {
  return std::filesystem::path(FSREC_TEST_DATA_DIR) / "fixture.csv";
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// 1. Constant predictors on a balanced test set reproduce the reference
// collapse rows, including the averaged row. Collapse rows are quoted to
// two decimals before averaging; the raw average of 2/3 and 0 would land
// on 0.333, not the expected 0.335.
void criterion_collapse_anchors(Checker& c) {
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2 == 0 ? 1 : 0;
  const std::vector<int> always_yes(labels.size(), 1);
  const std::vector<int> always_no(labels.size(), 0);

  const auto yes = metrics::classification_metrics(always_yes, labels);
  c.near(yes.accuracy, 0.500, 1e-3, "all-positive accuracy");
  c.near(yes.precision, 0.500, 1e-3, "all-positive precision");
  c.near(yes.f1, 0.667, 1e-3, "all-positive f1");
  c.require(yes.degenerate, "all-positive predictor must be flagged degenerate");

  const auto no = metrics::classification_metrics(always_no, labels);
  c.near(no.accuracy, 0.500, 1e-3, "all-negative accuracy");
  c.near(no.precision, 0.0, 1e-3, "all-negative precision");
  c.near(no.f1, 0.0, 1e-3, "all-negative f1");
  c.require(no.degenerate && no.zero_division,
            "all-negative predictor must be flagged degenerate and zero-division");

  const auto round2 = [](double x) { return std::round(x * 100.0) / 100.0; };
  c.near((round2(yes.accuracy) + round2(no.accuracy)) / 2.0, 0.500, 1e-3,
         "collapse-average accuracy");
  c.near((round2(yes.precision) + round2(no.precision)) / 2.0, 0.250, 1e-3,
         "collapse-average precision");
  c.near((round2(yes.f1) + round2(no.f1)) / 2.0, 0.335, 1e-3,
         "collapse-average f1");
}

// 2. Improvement percentages are plain 100 * cell / baseline ratios; the
// two anchor pairs round to 550% and 412%.
void criterion_improvement_anchors(Checker& c) {
  const double a = harness::improvement_pct(0.011, 0.002);
  c.require(std::lround(a) == 550,
            formatf("improvement for 0.011 over 0.002 rounds to %ld, want 550",
                    std::lround(a)));
  c.near(a, 550.0, 1e-9, "improvement for 0.011 over 0.002");
  c.require(a == 100.0 * 0.011 / 0.002,
            "improvement for 0.011 over 0.002 must be exactly 100*cell/baseline");

  const double b = harness::improvement_pct(0.210, 0.051);
  c.require(std::lround(b) == 412,
            formatf("improvement for 0.210 over 0.051 rounds to %ld, want 412",
                    std::lround(b)));
  c.require(b == 100.0 * 0.210 / 0.051,
            "improvement for 0.210 over 0.051 must be exactly 100*cell/baseline");

  c.require(harness::improvement_pct(0.002, 0.002) == 100.0,
            "a baseline compared against itself must read exactly 100");
}

// 3. Classification and ranking metrics agree exactly with naive oracles
// on 1,000 randomized cases (ranking cases are 50 users x 200 candidates).
void criterion_metric_oracles(Checker& c) {
  Rng rng(1234);

  for (int case_idx = 0; case_idx < 500 && c.failures.size() < 5; ++case_idx) {
    const std::size_t n = 1 + rng.next_below(199);
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng.next_below(2));
      labels[i] = static_cast<int>(rng.next_below(2));
    }
    const auto got = metrics::classification_metrics(preds, labels);
    const auto want = oracle::classification(preds, labels);
    if (got.accuracy != want.accuracy || got.precision != want.precision ||
        got.recall != want.recall || got.f1 != want.f1) {
      c.failures.push_back(
          formatf("classification case %d disagrees with the oracle", case_idx));
    }
  }

  std::vector<std::string> ids(200);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = formatf("c%03zu", i);
  const std::vector<std::size_t> ks = {1, 5, 10, 100};
  for (int case_idx = 0; case_idx < 500 && c.failures.size() < 10; ++case_idx) {
    std::vector<std::size_t> ranks(50);
    for (std::size_t u = 0; u < ranks.size(); ++u) {
      std::vector<double> scores(ids.size());
      // Coarse score grid so tie-breaking is exercised constantly.
      for (auto& s : scores) s = static_cast<double>(rng.next_below(64)) / 8.0;
      ranks[u] = oracle::rank_by_sort(
          ids, scores, static_cast<std::size_t>(rng.next_below(ids.size())));
    }
    const auto got = metrics::ranking_metrics(ranks, ks);
    for (std::size_t k : ks) {
      if (got.hr.at(k) != oracle::hr_at_k(ranks, k) ||
          got.mrr.at(k) != oracle::mrr_at_k(ranks, k)) {
        c.failures.push_back(
            formatf("ranking case %d disagrees with the oracle at k=%zu",
                    case_idx, k));
      }
    }
  }
}

// 4. Distance measures match a long-double oracle within 1e-9 absolute at
// d=1024, and identical input yields (0, 0, 1) exactly.
void criterion_distance_oracles(Checker& c) {
  Rng rng(77);
  const std::size_t d = 1024;
  for (int pair_idx = 0; pair_idx < 100 && c.failures.size() < 5; ++pair_idx) {
    const double scale = std::pow(10.0, static_cast<double>(pair_idx % 5) - 2.0);
    std::vector<double> a(d), b(d);
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = scale * rng.next_gaussian();
      b[i] = scale * rng.next_gaussian();
    }
    c.near(semdist::manhattan_distance(a, b), oracle::manhattan(a, b), 1e-9,
           formatf("manhattan pair %d", pair_idx));
    c.near(semdist::euclidean_distance(a, b), oracle::euclidean(a, b), 1e-9,
           formatf("euclidean pair %d", pair_idx));
    const auto got = semdist::cosine_similarity(a, b);
    const auto want = oracle::cosine(a, b);
    if (got.has_value() != want.has_value()) {
      c.failures.push_back(formatf("cosine pair %d: definedness disagrees", pair_idx));
    } else if (got) {
      c.near(*got, *want, 1e-9, formatf("cosine pair %d", pair_idx));
    }
  }

  std::vector<double> v(d);
  for (auto& x : v) x = rng.next_gaussian();
  c.require(semdist::manhattan_distance(v, v) == 0.0,
            "identity manhattan must be exactly 0");
  c.require(semdist::euclidean_distance(v, v) == 0.0,
            "identity euclidean must be exactly 0");
  c.require(semdist::cosine_similarity(v, v).value_or(0.0) == 1.0,
            "identity cosine must be exactly 1");

  embed::EmbeddingSet left(embed::Variant::kRepBert, SubjectKind::kUser, d);
  embed::EmbeddingSet right(embed::Variant::kRawBert, SubjectKind::kUser, d);
  for (int s = 0; s < 5; ++s) {
    std::vector<double> row(d);
    for (auto& x : row) x = rng.next_gaussian();
    left.insert(formatf("u%d", s), row);
    right.insert(formatf("u%d", s), std::move(row));
  }
  const auto report = semdist::compare_sets(left, right);
  c.require(report.n == 5, "set comparison must pair all five subjects");
  c.require(report.mean_manhattan == 0.0 && report.mean_euclidean == 0.0 &&
                report.mean_cosine == 1.0,
            "identical sets must report means (0, 0, 1) exactly");
}

// Backprop gradients for every parameter of `net` against central finite
// differences of the batch BCE loss.
void check_network_gradients(Checker& c, nn::Network& net, const nn::Tensor& input,
                             const std::vector<double>& labels, const char* tag) {
  net.zero_grads();
  auto out = net.forward(input, true);
  const auto loss = nn::bce_loss(out.values, labels);
  net.backward(nn::Tensor(out.shape, loss.grad));

  std::vector<double> analytic;
  for (auto view : net.parameters()) {
    analytic.insert(analytic.end(), view.grads->begin(), view.grads->end());
  }
  const auto base = net.flat_parameters();
  c.require(analytic.size() == base.size(),
            formatf("%s: gradient count %zu != parameter count %zu", tag,
                    analytic.size(), base.size()));
  c.require(base.size() >= 20,
            formatf("%s: only %zu probes, need at least 20", tag, base.size()));

  std::vector<std::size_t> probe(base.size());
  std::iota(probe.begin(), probe.end(), std::size_t{0});
  const auto f = [&](const std::vector<double>& w) {
    net.set_flat_parameters(w);
    auto o = net.forward(input, true);
    return nn::bce_loss(o.values, labels).loss;
  };
  const auto numeric = oracle::fd_gradient(f, base, probe, 1e-5);
  net.set_flat_parameters(base);

  double worst = 0.0;
  std::size_t worst_idx = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double err = oracle::rel_error(analytic[i], numeric[i]);
    if (err > worst) {
      worst = err;
      worst_idx = i;
    }
  }
  c.require(worst < 1e-4,
            formatf("%s: max relative error %.3g at parameter %zu (limit 1e-4)",
                    tag, worst, worst_idx));
}

// 5. Every layer type and the pairwise ranking triple loss pass central
// finite differencing. The triple-loss gradient is recovered from an actual
// single-step training run, which pins the trainer to the checked formula.
void criterion_gradient_checks(Checker& c) {
  {
    nn::Network net(nn::mlp_classifier_spec(6, 11, {5}));
    Rng rng(21);
    std::vector<double> values(8 * 6), labels(8);
    for (auto& x : values) x = 0.8 * rng.next_gaussian();
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2 ? 1.0 : 0.0;
    check_network_gradients(c, net, nn::Tensor({8, 6}, values), labels,
                            "mlp stack (dense/relu/sigmoid)");
  }
  {
    nn::Network net(nn::cnn_classifier_spec(48, 12));
    Rng rng(22);
    std::vector<double> values(4 * 48), labels = {1.0, 0.0, 1.0, 0.0};
    for (auto& x : values) x = 0.5 * rng.next_gaussian();
    check_network_gradients(c, net, nn::Tensor({4, 1, 48}, values), labels,
                            "conv stack (conv1d/relu/flatten/dense/sigmoid)");
  }
  {
    nn::NetworkSpec spec;
    spec.layers = {nn::dense(6, 4), nn::relu(), nn::dropout(0.0), nn::dense(4, 1),
                   nn::sigmoid()};
    spec.init_seed = 13;
    nn::Network net(spec);
    Rng rng(23);
    std::vector<double> values(8 * 6), labels(8);
    for (auto& x : values) x = 0.8 * rng.next_gaussian();
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2 ? 0.0 : 1.0;
    check_network_gradients(c, net, nn::Tensor({8, 6}, values), labels,
                            "dropout stack (dense/relu/dropout/dense/sigmoid)");
  }

  // One user with one positive and a two-item catalog forces a single
  // (u, i, j) update per epoch, so one step at learning rate lr recovers the
  // implementation's gradient as (before - after) / lr.
  const std::size_t d = 8;
  const double lambda = 0.01, lr = 0.01;
  corpus::SplitBundle splits;
  splits.user_train["u1"] = {Interaction{"u1", "ma", "", std::nullopt, 100}};
  splits.test["u1"] = corpus::HeldOutEntry{"mb", 200};
  embed::EmbeddingSet users(embed::Variant::kRepW2v, SubjectKind::kUser, d);
  embed::EmbeddingSet items(embed::Variant::kRepW2v, SubjectKind::kItem, d);
  Rng rng(5);
  const auto draw = [&] {
    std::vector<double> v(d);
    for (auto& x : v) x = 0.5 * rng.next_gaussian();
    return v;
  };
  users.insert("u1", draw());
  items.insert("ma", draw());
  items.insert("mb", draw());

  directrec::ModelOptions options;
  options.bpr_lambda = lambda;
  options.bpr_item_bias = true;
  auto model = directrec::init_model(directrec::ModelKind::kBprMf, splits, &users,
                                     &items, directrec::finetuned_mode(), 17, options);

  // theta = [u, i, j, bias_i, bias_j]; item ids sort as ma < mb.
  std::vector<double> before;
  before.insert(before.end(), model.user_table[0].begin(), model.user_table[0].end());
  before.insert(before.end(), model.item_table[0].begin(), model.item_table[0].end());
  before.insert(before.end(), model.item_table[1].begin(), model.item_table[1].end());
  before.push_back(model.item_bias[0]);
  before.push_back(model.item_bias[1]);

  nn::OptimizerConfig config;
  config.kind = "sgd";
  config.learning_rate = lr;
  config.momentum = 0.0;
  config.weight_decay = 0.0;
  config.batch_size = 1;
  config.epochs = 1;
  config.seed = 3;
  const auto result = directrec::bpr_train(model, config);
  c.require(!result.diverged, "single ranking step must not diverge");

  std::vector<double> after;
  after.insert(after.end(), model.user_table[0].begin(), model.user_table[0].end());
  after.insert(after.end(), model.item_table[0].begin(), model.item_table[0].end());
  after.insert(after.end(), model.item_table[1].begin(), model.item_table[1].end());
  after.push_back(model.item_bias[0]);
  after.push_back(model.item_bias[1]);

  std::vector<double> implemented(before.size());
  for (std::size_t k = 0; k < before.size(); ++k) {
    implemented[k] = (before[k] - after[k]) / lr;
  }

  const auto triple_loss = [&](const std::vector<double>& t) {
    double x = 0.0, reg = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      x += t[k] * t[d + k] - t[k] * t[2 * d + k];
      reg += t[k] * t[k] + t[d + k] * t[d + k] + t[2 * d + k] * t[2 * d + k];
    }
    x += t[3 * d] - t[3 * d + 1];
    reg += t[3 * d] * t[3 * d] + t[3 * d + 1] * t[3 * d + 1];
    const double softplus =
        x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
    return softplus + 0.5 * lambda * reg;
  };
  std::vector<std::size_t> probe(before.size());
  std::iota(probe.begin(), probe.end(), std::size_t{0});
  c.require(probe.size() >= 20,
            formatf("triple loss: only %zu probes, need at least 20", probe.size()));
  const auto numeric = oracle::fd_gradient(triple_loss, before, probe, 1e-5);

  double worst = 0.0;
  std::size_t worst_idx = 0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double err = oracle::rel_error(implemented[k], numeric[k]);
    if (err > worst) {
      worst = err;
      worst_idx = k;
    }
  }
  c.require(worst < 1e-4,
            formatf("triple loss: max relative error %.3g at parameter %zu "
                    "(limit 1e-4)",
                    worst, worst_idx));
}

// Mean HR@10 over 10 seeded repetitions of an NCF-MLP arm on the latent
// world. All arms share repetition seeds, so candidate pools match.
double latent_arm_mean_hr10(Checker& c, const synthetic::LatentWorld& world,
                            const directrec::InjectionMode& mode, bool inject,
                            const char* tag) {
  const std::vector<std::size_t> ks = {10};
  const auto policy = directrec::CandidatePolicy::parse("sampled:99");
  double total = 0.0;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    const std::uint64_t seed = 900 + rep;
    directrec::ModelOptions options;
    options.random_dim = 16;
    options.mlp_hidden = {64, 32};
    auto model = directrec::init_model(directrec::ModelKind::kNcfMlp, world.splits,
                                       inject ? &world.users : nullptr,
                                       inject ? &world.items : nullptr, mode, seed,
                                       options);
    nn::OptimizerConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 64;
    config.epochs = 4;
    config.seed = seed;
    const auto trained = directrec::ncf_train(model, config, 4);
    c.require(!trained.diverged,
              formatf("%s arm diverged at repetition %llu", tag,
                      static_cast<unsigned long long>(rep)));
    const auto eval = directrec::evaluate(model, world.splits, ks, policy, seed);
    total += eval.metrics.hr.at(10);
  }
  return total / 10.0;
}

// 6. On a 16-d latent-factor world (300 users, 1,000 items, 5 train
// interactions per user, held-out most-preferred unseen item) injecting the
// true factors frozen at least doubles the random baseline's HR@10, and
// freezing beats fine-tuning.
void criterion_injected_signal(Checker& c) {
  const auto world = synthetic::make_latent_world(300, 1000, 16, 5, 99);
  const double random_mean =
      latent_arm_mean_hr10(c, world, directrec::random_mode(), false, "random");
  const double fixed_mean =
      latent_arm_mean_hr10(c, world, directrec::fixed_mode(), true, "fixed");
  const double tuned_mean =
      latent_arm_mean_hr10(c, world, directrec::finetuned_mode(), true, "fine-tuned");

  c.require(fixed_mean > 0.0, "fixed-mode mean HR@10 is zero");
  c.require(fixed_mean >= 2.0 * random_mean,
            formatf("fixed-mode mean HR@10 %.4f is below 2x the random "
                    "baseline %.4f",
                    fixed_mean, random_mean));
  c.require(fixed_mean >= tuned_mean,
            formatf("fixed-mode mean HR@10 %.4f is below fine-tuned %.4f",
                    fixed_mean, tuned_mean));
}

bool table_bits_equal(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].size() != b[r].size()) return false;
    for (std::size_t k = 0; k < a[r].size(); ++k) {
      if (std::bit_cast<std::uint64_t>(a[r][k]) !=
          std::bit_cast<std::uint64_t>(b[r][k])) {
        return false;
      }
    }
  }
  return true;
}

// 7. Training in fixed mode leaves the injected tables bitwise unchanged
// for both trainers, while the trainable parts still move.
void criterion_fixed_tables(Checker& c) {
  const auto world = synthetic::make_embedded_world(6, 40, 6, 16, 2);
  {
    directrec::ModelOptions options;
    options.bpr_item_bias = true;
    auto model =
        directrec::init_model(directrec::ModelKind::kBprMf, world.splits,
                              &world.users, &world.items, directrec::fixed_mode(),
                              7, options);
    const auto users_before = model.user_table;
    const auto items_before = model.item_table;
    nn::OptimizerConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 16;
    config.epochs = 5;
    config.seed = 9;
    const auto result = directrec::bpr_train(model, config);
    c.require(!result.diverged, "pairwise fixed-mode training diverged");
    c.require(table_bits_equal(model.user_table, users_before),
              "pairwise fixed-mode training moved the user table");
    c.require(table_bits_equal(model.item_table, items_before),
              "pairwise fixed-mode training moved the item table");
    const bool bias_moved =
        std::any_of(model.item_bias.begin(), model.item_bias.end(),
                    [](double b) { return b != 0.0; });
    c.require(bias_moved, "item bias never moved, so nothing actually trained");
  }
  {
    directrec::ModelOptions options;
    options.mlp_hidden = {8, 4};
    auto model =
        directrec::init_model(directrec::ModelKind::kNcfMlp, world.splits,
                              &world.users, &world.items, directrec::fixed_mode(),
                              7, options);
    const auto users_before = model.user_table;
    const auto items_before = model.item_table;
    const double tower_before = model.tower->parameter_sum();
    nn::OptimizerConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 16;
    config.epochs = 3;
    config.seed = 9;
    const auto result = directrec::ncf_train(model, config, 2);
    c.require(!result.diverged, "pointwise fixed-mode training diverged");
    c.require(table_bits_equal(model.user_table, users_before),
              "pointwise fixed-mode training moved the user table");
    c.require(table_bits_equal(model.item_table, items_before),
              "pointwise fixed-mode training moved the item table");
    c.require(model.tower->parameter_sum() != tower_before,
              "tower never moved, so nothing actually trained");
  }
}

struct PipelineArtifacts {
  std::vector<std::pair<std::string, std::string>> parts;  // name -> bytes
};

// Full offline pipeline on the shipped fixture: ingest, split, prompts,
// extractive summaries, hash embeddings, then a seeded ranking experiment.
PipelineArtifacts run_offline_pipeline(Checker& c, const std::filesystem::path& work) {
  std::filesystem::create_directories(work);
  auto ingested = corpus::ingest(fixture_path(), corpus::IngestFormat::kCsv);
  const auto cohort = corpus::select_cohort(ingested.store, 50, 7);
  auto splits = corpus::leave_two_out(ingested.store, cohort);
  splits.user_train = corpus::fewshot_downsample(splits.user_train, 8, 7);
  auto item_train = corpus::build_item_train(ingested.store, cohort, splits, 6, 7);
  splits.item_train = std::move(item_train.item_train);
  splits.fallback_items = item_train.fallback_items;
  corpus::save_store(ingested.store, work / "store.bin");
  corpus::save_splits(splits, work / "splits");

  const auto prompts = prompt::build_all_prompts(splits, prompt::PromptConfig{});
  prompt::save_prompts(prompts, work / "prompts.jsonl");
  const auto generated = repgen::generate_all(prompts, repgen::GenerationConfig{},
                                              repgen::Backend::kOffline);
  c.require(generated.deferred.empty(),
            formatf("offline generation deferred %zu subjects",
                    generated.deferred.size()));
  repgen::save_representations(generated.representations, work / "reps.jsonl");

  embed::HashEmbedder embedder;
  const auto variant = embed::build_variant(splits, generated.representations,
                                            embedder, embed::Variant::kRepW2v);
  c.require(variant.missing_subjects.empty(),
            formatf("embedding skipped %zu subjects", variant.missing_subjects.size()));
  embed::save_variant(variant, work / "emb");

  harness::ExperimentConfig config;
  config.task = "rank";
  config.splits_dir = (work / "splits").string();
  config.variants["rep+w2v"] = (work / "emb" / "rep+w2v").string();
  config.models = {"bpr-mf"};
  config.modes = {"random", "fixed", "fine-tuned"};
  config.repetitions = 2;
  config.base_seed = 11;
  config.k_list = {10};
  config.optimizer.learning_rate = 0.05;
  config.optimizer.epochs = 2;
  config.random_dim = 16;
  config.workers = 1;
  const auto report = harness::run_experiment(config);
  c.require(report.all_cells_completed, "pipeline experiment lost a cell");

  PipelineArtifacts out;
  out.parts.emplace_back("report.json",
                         harness::render_report(report, harness::ReportFormat::kJson));
  out.parts.emplace_back("report.csv",
                         harness::render_report(report, harness::ReportFormat::kCsv));
  out.parts.emplace_back(
      "report.md", harness::render_report(report, harness::ReportFormat::kMarkdown));
  out.parts.emplace_back("emb-users.jsonl", slurp(work / "emb" / "rep+w2v" / "users.jsonl"));
  out.parts.emplace_back("emb-items.jsonl", slurp(work / "emb" / "rep+w2v" / "items.jsonl"));
  out.parts.emplace_back("reps.jsonl", slurp(work / "reps.jsonl"));
  out.parts.emplace_back("prompts.jsonl", slurp(work / "prompts.jsonl"));
  out.parts.emplace_back("user_train.jsonl", slurp(work / "splits" / "user_train.jsonl"));
  out.parts.emplace_back("test.jsonl", slurp(work / "splits" / "test.jsonl"));
  return out;
}

// 8. Running the offline pipeline twice into the same directory produces
// byte-identical artifacts, reports included.
void criterion_offline_determinism(Checker& c) {
  testsupport::TempDir tmp;
  const auto work = tmp / "run";
  const auto first = run_offline_pipeline(c, work);
  std::filesystem::remove_all(work);
  const auto second = run_offline_pipeline(c, work);
  c.require(first.parts.size() == second.parts.size(), "artifact lists differ");
  for (std::size_t i = 0; i < std::min(first.parts.size(), second.parts.size());
       ++i) {
    if (first.parts[i].second != second.parts[i].second) {
      c.failures.push_back(first.parts[i].first + " differs between reruns");
    }
  }
}

// 9. The shipped fixture passes every split invariant: chronology, item
// coverage, the few-shot floor, and the per-item cap.
void criterion_split_invariants(Checker& c) {
  const auto ingested = corpus::ingest(fixture_path(), corpus::IngestFormat::kCsv);
  c.require(ingested.store.user_count() == 50,
            formatf("fixture has %zu users, want 50", ingested.store.user_count()));
  c.require(ingested.store.item_count() == 300,
            formatf("fixture has %zu items, want 300", ingested.store.item_count()));
  c.require(ingested.malformed_rows == 0,
            formatf("fixture produced %zu malformed rows", ingested.malformed_rows));

  const auto cohort = corpus::select_cohort(ingested.store, 50, 21);
  auto splits = corpus::leave_two_out(ingested.store, cohort);
  c.require(splits.dropped_users.empty(),
            formatf("%zu fixture users were dropped", splits.dropped_users.size()));
  splits.user_train = corpus::fewshot_downsample(splits.user_train, 8, 21);
  auto item_train = corpus::build_item_train(ingested.store, cohort, splits, 6, 21);
  splits.item_train = std::move(item_train.item_train);
  splits.fallback_items = item_train.fallback_items;

  const auto violations = corpus::check_split_invariants(ingested.store, splits, 8, 6);
  for (const auto& violation : violations) {
    c.failures.push_back("split invariant: " + violation);
  }
}

// 10. A runaway learning rate on the CNN classifier is flagged as
// divergence on that cell while the rest of the grid reports valid metrics.
void criterion_divergence_reporting(Checker& c) {
  testsupport::TempDir tmp;
  const auto world = synthetic::make_embedded_world(5, 40, 6, 24, 4);
  corpus::save_splits(world.splits, tmp / "splits");
  corpus::save_store(world.store, tmp / "store.bin");
  embed::save_variant(embed::VariantResult{world.users, world.items, {}},
                      tmp / "emb");

  harness::ExperimentConfig config;
  config.task = "interact";
  config.store_path = (tmp / "store.bin").string();
  config.splits_dir = (tmp / "splits").string();
  config.variants["rep+w2v"] = (tmp / "emb" / "rep+w2v").string();
  config.models = {"linear", "cnn"};
  config.repetitions = 2;
  config.base_seed = 5;
  config.optimizer.learning_rate = 0.1;
  config.optimizer.batch_size = 16;
  config.optimizer.epochs = 3;
  auto runaway = config.optimizer;
  runaway.learning_rate = 10.0;
  config.optimizer_overrides["cnn"] = runaway;
  config.workers = 1;

  const auto report = harness::run_experiment(config);
  c.require(report.all_cells_completed, "grid did not complete");
  c.require(report.cells.size() == 2,
            formatf("expected 2 cells, got %zu", report.cells.size()));
  for (const auto& cell : report.cells) {
    if (cell.model == "cnn") {
      c.require(cell.diverged_count == 2,
                formatf("cnn cell diverged_count %zu, want 2", cell.diverged_count));
      c.require(cell.completed == 0,
                formatf("cnn cell completed %zu, want 0", cell.completed));
      c.require(cell.mean_metrics.empty(), "cnn cell must not report means");
      for (const auto& rep : cell.repetitions) {
        c.require(rep.diverged && !rep.divergence_reason.empty(),
                  "cnn repetition missing its divergence flag or reason");
      }
    } else {
      c.require(cell.completed == 2,
                formatf("%s cell completed %zu, want 2", cell.model.c_str(),
                        cell.completed));
      c.require(cell.diverged_count == 0,
                formatf("%s cell unexpectedly diverged", cell.model.c_str()));
      const auto it = cell.mean_metrics.find("accuracy");
      c.require(it != cell.mean_metrics.end() && std::isfinite(it->second) &&
                    it->second >= 0.0 && it->second <= 1.0,
                formatf("%s cell accuracy missing or out of range",
                        cell.model.c_str()));
    }
  }
  const auto markdown =
      harness::render_report(report, harness::ReportFormat::kMarkdown);
  c.require(markdown.find("Non-convergence notes:") != std::string::npos,
            "markdown report is missing the non-convergence notes");
}

struct CriterionSpec {
  int number;
  const char* name;
  double budget_seconds;
  void (*fn)(Checker&);
};

constexpr CriterionSpec kCriteria[] = {
    {1, "degenerate classifier metric anchors", 1.0, criterion_collapse_anchors},
    {2, "improvement percentage anchors", 1.0, criterion_improvement_anchors},
    {3, "metric equivalence against brute-force oracles", 10.0, criterion_metric_oracles},
    {4, "distance equivalence against a high-precision oracle", 5.0, criterion_distance_oracles},
    {5, "gradients match central finite differences", 30.0, criterion_gradient_checks},
    {6, "injected factors beat random tables on a latent world", 300.0, criterion_injected_signal},
    {7, "fixed mode leaves injected tables bitwise unchanged", 10.0, criterion_fixed_tables},
    {8, "offline pipeline reruns byte-identically", 120.0, criterion_offline_determinism},
    {9, "fixture splits satisfy the split invariants", 1.0, criterion_split_invariants},
    {10, "divergent cell is flagged and the grid completes", 60.0, criterion_divergence_reporting},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    char* end = nullptr;
    const long n = std::strtol(argv[i], &end, 10);
    if (end == argv[i] || *end != '\0' || n < 1 || n > 10) {
      std::fprintf(stderr, "usage: %s [criterion-number...]\n", argv[0]);
      return 2;
    }
    selected.push_back(static_cast<int>(n));
  }

  bool all_ok = true;
  for (const auto& spec : kCriteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), spec.number) == selected.end()) {
      continue;
    }
    Checker checker;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      spec.fn(checker);
    } catch (const std::exception& e) {
      checker.failures.push_back(std::string("unhandled exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool within_budget = elapsed < spec.budget_seconds;
    const bool ok = checker.failures.empty() && within_budget;
    std::printf("%s  %2d  %-56s  %7.2fs (budget %gs)\n", ok ? "PASS" : "FAIL",
                spec.number, spec.name, elapsed, spec.budget_seconds);
    std::fflush(stdout);
    if (!within_budget) {
      std::fprintf(stderr, "criterion %d: over budget (%.2fs >= %gs)\n",
                   spec.number, elapsed, spec.budget_seconds);
    }
    for (const auto& failure : checker.failures) {
      std::fprintf(stderr, "criterion %d: %s\n", spec.number, failure.c_str());
    }
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
