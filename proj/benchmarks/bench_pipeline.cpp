// Microbenchmarks for the hot paths: hash embedding, distance reduction,
// BPR training steps, and full-catalog ranking evaluation.

#include <benchmark/benchmark.h>

#include <cstdio>
#include <string>
#include <vector>

#include "fsrec/corpus.hpp"
#include "fsrec/directrec.hpp"
#include "fsrec/embed.hpp"
#include "fsrec/rng.hpp"
#include "fsrec/semdist.hpp"

namespace {

using namespace fsrec;

std::string synthetic_review(Rng& rng, std::size_t words) {
  static const char* kWords[] = {"plot", "acting", "score", "slow", "brilliant",
                                 "camera", "boring", "classic", "sequel", "cast"};
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) text += ' ';
    text += kWords[rng.next_below(10)];
  }
  return text;
}

corpus::SplitBundle synthetic_splits(std::size_t users, std::size_t items,
                                     std::size_t per_user) {
  Rng rng(99);
  corpus::SplitBundle splits;
  char buffer[32];
  for (std::size_t u = 0; u < users; ++u) {
    std::snprintf(buffer, sizeof(buffer), "u%04zu", u);
    std::string user_id = buffer;
    std::vector<Interaction> train;
    for (std::size_t t = 0; t < per_user; ++t) {
      Interaction row;
      row.user_id = user_id;
      std::snprintf(buffer, sizeof(buffer), "i%04zu", rng.next_below(items));
      row.item_id = buffer;
      row.review = synthetic_review(rng, 12);
      row.timestamp = static_cast<std::int64_t>(1000 + t);
      train.push_back(std::move(row));
    }
    corpus::HeldOutEntry held;
    std::snprintf(buffer, sizeof(buffer), "i%04zu", rng.next_below(items));
    held.item_id = buffer;
    held.timestamp = 5000;
    splits.test[user_id] = held;
    std::snprintf(buffer, sizeof(buffer), "i%04zu", rng.next_below(items));
    held.item_id = buffer;
    splits.validation[user_id] = held;
    splits.user_train[user_id] = std::move(train);
  }
  return splits;
}

void BM_HashEmbed(benchmark::State& state) {
  Rng rng(7);
  std::string text = synthetic_review(rng, 200);
  embed::HashEmbedder embedder;
  const auto d = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto values = embedder.embed(text, d);
    benchmark::DoNotOptimize(values.data());
  }
}
BENCHMARK(BM_HashEmbed)->Arg(200)->Arg(1024);

void BM_DistanceReport(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 1024;
  embed::HashEmbedder embedder;
  embed::EmbeddingSet a(embed::Variant::kRepBert, SubjectKind::kUser, d);
  embed::EmbeddingSet b(embed::Variant::kRepBert, SubjectKind::kUser, d);
  Rng rng(11);
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = "u" + std::to_string(i);
    a.insert(id, embedder.embed(synthetic_review(rng, 30), d));
    b.insert(id, embedder.embed(synthetic_review(rng, 30), d));
  }
  for (auto _ : state) {
    auto report = semdist::compare_sets(a, b);
    benchmark::DoNotOptimize(report.mean_cosine);
  }
}
BENCHMARK(BM_DistanceReport)->Arg(200);

void BM_BprEpoch(benchmark::State& state) {
  auto splits = synthetic_splits(100, 400, 5);
  nn::OptimizerConfig config;
  config.epochs = 1;
  config.seed = 3;
  directrec::ModelOptions options;
  options.random_dim = 64;
  for (auto _ : state) {
    state.PauseTiming();
    auto model = directrec::init_model(directrec::ModelKind::kBprMf, splits,
                                       nullptr, nullptr,
                                       directrec::random_mode(), 3, options);
    state.ResumeTiming();
    auto result = directrec::bpr_train(model, config);
    benchmark::DoNotOptimize(result.epochs_run);
  }
}
BENCHMARK(BM_BprEpoch);

void BM_RankEvaluate(benchmark::State& state) {
  auto splits = synthetic_splits(50, 1000, 5);
  directrec::ModelOptions options;
  options.random_dim = 32;
  auto model = directrec::init_model(directrec::ModelKind::kBprMf, splits,
                                     nullptr, nullptr,
                                     directrec::random_mode(), 5, options);
  std::vector<std::size_t> k_list{10, 100};
  directrec::CandidatePolicy policy;
  for (auto _ : state) {
    auto eval = directrec::evaluate(model, splits, k_list, policy, 5);
    benchmark::DoNotOptimize(eval.metrics.n_users);
  }
}
BENCHMARK(BM_RankEvaluate);

}  // namespace

BENCHMARK_MAIN();
