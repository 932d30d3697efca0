#include <vector>

#include "doctest.h"
#include "fsrec/metrics.hpp"
#include "fsrec/rng.hpp"
#include "support/oracles.hpp"

using namespace fsrec;
using namespace fsrec::metrics;

TEST_SUITE("metrics") {

TEST_CASE("perfect predictions score 1.0 across the board") {
  auto m = classification_metrics({1, 0, 1, 0, 1}, {1, 0, 1, 0, 1});
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.tp == 3);
  CHECK(m.tn == 2);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
  CHECK_FALSE(m.degenerate);
  CHECK_FALSE(m.zero_division);
}

TEST_CASE("all-positive predictions on a balanced set") {
  // The degenerate-predictor anchor: accuracy 1/2, precision 1/2, f1 2/3.
  std::vector<int> predictions(10, 1);
  std::vector<int> labels = {1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  auto m = classification_metrics(predictions, labels);
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.degenerate);
  CHECK_FALSE(m.zero_division);
}

TEST_CASE("all-negative predictions on a balanced set") {
  std::vector<int> predictions(10, 0);
  std::vector<int> labels = {1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  auto m = classification_metrics(predictions, labels);
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.degenerate);
  CHECK(m.zero_division);
}

TEST_CASE("half-right checkerboard") {
  auto m = classification_metrics({1, 0, 1, 0}, {1, 1, 0, 0});
  CHECK(m.accuracy == 0.5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.f1 == 0.5);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.tn == 1);
  CHECK(m.fn == 1);
  CHECK_FALSE(m.degenerate);
}

TEST_CASE("hand-checked confusion counts") {
  auto m = classification_metrics({1, 1, 1, 0, 0}, {1, 0, 1, 1, 0});
  CHECK(m.tp == 2);
  CHECK(m.fp == 1);
  CHECK(m.tn == 1);
  CHECK(m.fn == 1);
  CHECK(m.accuracy == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("classification input validation") {
  CHECK_THROWS(classification_metrics({}, {}));
  CHECK_THROWS(classification_metrics({1, 0}, {1}));
  CHECK_THROWS(classification_metrics({2}, {1}));
  CHECK_THROWS(classification_metrics({1}, {-1}));
}

TEST_CASE("classification agrees exactly with the reference arithmetic") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.next_below(50);
    std::vector<int> predictions(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      predictions[i] = static_cast<int>(rng.next_below(2));
      labels[i] = static_cast<int>(rng.next_below(2));
    }
    auto lib = classification_metrics(predictions, labels);
    auto ref = oracle::classification(predictions, labels);
    CHECK(lib.accuracy == ref.accuracy);
    CHECK(lib.precision == ref.precision);
    CHECK(lib.recall == ref.recall);
    CHECK(lib.f1 == ref.f1);
  }
}

TEST_CASE("ranking anchors") {
  auto all_first = ranking_metrics({1, 1, 1}, {10});
  CHECK(all_first.hr.at(10) == 1.0);
  CHECK(all_first.mrr.at(10) == 1.0);
  CHECK(all_first.n_users == 3);

  auto split = ranking_metrics({2, 20}, {10});
  CHECK(split.hr.at(10) == 0.5);
  CHECK(split.mrr.at(10) == 0.25);

  auto third = ranking_metrics({3}, {10});
  CHECK(third.mrr.at(10) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto five = ranking_metrics({5}, {10, 100});
  CHECK(five.hr.at(10) == 1.0);
  CHECK(five.hr.at(100) == 1.0);
  CHECK(five.mrr.at(10) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(five.mrr.at(100) == doctest::Approx(0.2).epsilon(1e-15));

  // Rank 11 misses k=10 entirely but counts at k=100.
  auto eleven = ranking_metrics({11}, {10, 100});
  CHECK(eleven.hr.at(10) == 0.0);
  CHECK(eleven.mrr.at(10) == 0.0);
  CHECK(eleven.hr.at(100) == 1.0);
  CHECK(eleven.mrr.at(100) == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
}

TEST_CASE("ranking input validation") {
  CHECK_THROWS(ranking_metrics({}, {10}));
  CHECK_THROWS(ranking_metrics({1}, {}));
  CHECK_THROWS(ranking_metrics({0}, {10}));
}

TEST_CASE("hit rate dominates reciprocal rank and grows with k") {
  Rng rng(77);
  std::vector<std::size_t> ranks;
  for (int i = 0; i < 100; ++i) ranks.push_back(1 + rng.next_below(150));
  auto m = ranking_metrics(ranks, {5, 10, 50, 100});
  double prev_hr = 0.0;
  for (std::size_t k : m.k_list) {
    CHECK(m.mrr.at(k) <= m.hr.at(k));
    CHECK(m.hr.at(k) <= 1.0);
    CHECK(m.hr.at(k) >= prev_hr);
    prev_hr = m.hr.at(k);
  }
}

TEST_CASE("ranking agrees bit-for-bit with the reference accumulation") {
  Rng rng(909);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng.next_below(80);
    std::vector<std::size_t> ranks(n);
    for (auto& r : ranks) r = 1 + rng.next_below(200);
    auto m = ranking_metrics(ranks, {10, 100});
    for (std::size_t k : {std::size_t{10}, std::size_t{100}}) {
      CHECK(m.hr.at(k) == oracle::hr_at_k(ranks, k));
      CHECK(m.mrr.at(k) == oracle::mrr_at_k(ranks, k));
    }
  }
}

}  // TEST_SUITE
