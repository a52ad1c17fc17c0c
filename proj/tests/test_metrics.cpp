#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "metrics.hpp"
#include "rng.hpp"

using namespace prism;

namespace {

// Exhaustive sweep oracle: try every candidate threshold (the probabilities
// themselves), recomputing P/R/F1 from scratch each time.
double brute_force_best_f1(const std::vector<PredRecord>& records, double* theta_out = nullptr) {
  int64_t gold = 0;
  for (const auto& r : records) gold += r.gold ? 1 : 0;
  double best_f1 = 0.0;
  double best_theta = -1.0;
  std::vector<double> candidates;
  for (const auto& r : records) candidates.push_back(r.prob);
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (double theta : candidates) {
    int64_t tp = 0, pred = 0;
    for (const auto& r : records) {
      if (r.prob > theta) {
        ++pred;
        tp += r.gold ? 1 : 0;
      }
    }
    const double p = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
    const double rc = static_cast<double>(tp) / static_cast<double>(gold);
    const double f1 = (p + rc) == 0.0 ? 0.0 : 2 * p * rc / (p + rc);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_theta = theta;
    } else if (best_theta < 0.0) {
      best_theta = theta;  // first candidate (largest) wins all-zero ties
    }
  }
  if (theta_out) *theta_out = best_theta;
  return best_f1;
}

std::vector<PredRecord> random_records(int n, uint64_t seed, double gold_rate = 0.3) {
  Rng rng(seed);
  std::vector<PredRecord> records;
  for (int i = 0; i < n; ++i) {
    PredRecord r;
    r.doc = static_cast<int>(rng.below(4));
    r.head = static_cast<int>(rng.below(5));
    r.tail = static_cast<int>(rng.below(5));
    r.rel = static_cast<int>(rng.below(6));
    r.prob = 0.001 + 0.998 * rng.uniform();
    r.gold = rng.uniform() < gold_rate;
    records.push_back(r);
  }
  return records;
}

Corpus nameless_corpus(int docs) {
  Corpus corpus;
  for (int d = 0; d < docs; ++d) {
    RawDocument doc;
    doc.title = "doc" + std::to_string(d);
    doc.sents = {{"a", "b", "c", "d", "e"}};
    for (int e = 0; e < 5; ++e)
      doc.entities.push_back({{"n" + std::to_string(d) + "_" + std::to_string(e), 0, e, e + 1, "T"}});
    corpus.push_back(doc);
  }
  return corpus;
}

}  // namespace

TEST_CASE("best_threshold: separable, single record, errors") {
  // gold records all above every negative: threshold separates, F1 = 1
  std::vector<PredRecord> records;
  for (int i = 0; i < 5; ++i) records.push_back({0, 0, 1, 0, 0.8 + 0.02 * i, true});
  for (int i = 0; i < 7; ++i) records.push_back({0, 0, 1, 1, 0.1 + 0.05 * i, false});
  const ThresholdResult best = best_threshold(records);
  CHECK(best.f1 == 1.0);
  CHECK(best.threshold == doctest::Approx(0.4).epsilon(1e-12));  // max negative
  CHECK(best.threshold < 0.8);

  // single prediction: the only candidate is returned
  const ThresholdResult single = best_threshold({{0, 0, 1, 0, 0.7, true}});
  CHECK(single.threshold == 0.7);

  CHECK_THROWS_AS(best_threshold({}), DataError);
  CHECK_THROWS_AS(best_threshold({{0, 0, 1, 0, 0.5, false}}), DataError);
}

TEST_CASE("best_threshold equals the exhaustive sweep oracle") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const auto records = random_records(50, seed);
    int64_t gold = 0;
    for (const auto& r : records) gold += r.gold ? 1 : 0;
    if (gold == 0) continue;
    const ThresholdResult fast = best_threshold(records);
    double oracle_theta = 0.0;
    const double oracle_f1 = brute_force_best_f1(records, &oracle_theta);
    CHECK(fast.f1 == doctest::Approx(oracle_f1).epsilon(1e-12));
    CHECK(fast.threshold == oracle_theta);
    // threshold optimality over the whole candidate set
    for (const auto& r : records) {
      int64_t tp = 0, pred = 0;
      for (const auto& q : records)
        if (q.prob > r.prob) {
          ++pred;
          tp += q.gold ? 1 : 0;
        }
      const double p = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
      const double rc = static_cast<double>(tp) / static_cast<double>(gold);
      const double f1 = (p + rc) == 0 ? 0.0 : 2 * p * rc / (p + rc);
      CHECK(f1 <= fast.f1 + 1e-15);
    }
  }
}

TEST_CASE("micro_scores: empty prediction set, hand counts, ign reduction") {
  const Corpus corpus = nameless_corpus(2);
  TrainIndex empty_index;
  empty_index.rel_freq.assign(7, 0);

  // empty predicted set, nonempty gold: P=0, R=0, F1=0
  std::vector<PredRecord> records = {{0, 0, 1, 0, 0.4, true}, {0, 0, 2, 1, 0.3, false}};
  const MicroScores empty = micro_scores(records, 0.9, corpus, empty_index);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);

  // 3 predictions, 2 correct, 4 gold -> P=2/3, R=1/2, F1=4/7
  records = {
      {0, 0, 1, 0, 0.9, true},  {0, 0, 2, 0, 0.9, true},  {0, 0, 3, 0, 0.9, false},
      {0, 1, 2, 0, 0.1, true},  {1, 0, 1, 0, 0.1, true},
  };
  const MicroScores hand = micro_scores(records, 0.5, corpus, empty_index);
  CHECK(hand.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(hand.recall == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(hand.f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
  // empty train overlap: Ign F1 equals F1 exactly
  CHECK(hand.ign_f1 == hand.f1);
}

TEST_CASE("ign f1 removes train-shared triples from predictions and gold") {
  Corpus corpus = nameless_corpus(1);
  // train doc whose fact (n0_0, n0_1, rel 0) matches eval doc 0's pair (0,1)
  Corpus train = nameless_corpus(1);
  train[0].labels = {{0, 1, 0, {}}};
  RelationSchema schema = RelationSchema::from_entries(
      {{"R0", "a", "x"}, {"R1", "b", "y"}, {"R2", "c", "z"}});
  const TrainIndex idx = build_train_index(train, schema);
  CHECK(idx.rel_freq[0] == 1);

  const std::vector<PredRecord> records = {
      {0, 0, 1, 0, 0.9, true},   // shared with train: dropped from both sides
      {0, 0, 2, 1, 0.9, true},   // kept, correct
      {0, 1, 2, 1, 0.9, false},  // kept, wrong
      {0, 2, 3, 2, 0.1, true},   // kept, missed
  };
  const MicroScores s = micro_scores(records, 0.5, corpus, idx);
  CHECK(s.f1 == doctest::Approx(2.0 * (2.0 / 3.0) * (2.0 / 3.0) / (4.0 / 3.0)).epsilon(1e-12));
  // ign: predictions {(0,2),(1,2)}, gold {(0,2),(2,3)} -> P=1/2, R=1/2
  CHECK(s.ign_f1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("macro scores: simple averages, buckets, empty bucket absent") {
  RelationSchema schema = RelationSchema::from_entries(
      {{"R0", "a", "x"}, {"R1", "b", "y"}, {"R2", "c", "z"}});
  const Corpus corpus = nameless_corpus(1);
  TrainIndex idx;
  idx.rel_freq = {600, 250, 40, 0};  // schema order; NA slot unused

  // two relations with F1 {1, 0}: macro 0.5 over those two, third relation idle
  const std::vector<PredRecord> records = {
      {0, 0, 1, 0, 0.9, true},  // R0 predicted & gold
      {0, 0, 2, 1, 0.9, false},  // R1 predicted, wrong
      {0, 1, 2, 1, 0.1, true},   // R1 gold, missed
  };
  const MacroScores m = macro_scores(records, 0.5, idx, schema);
  REQUIRE(m.per_relation.size() == 3);
  CHECK(m.per_relation[0].f1 == 1.0);
  CHECK(m.per_relation[1].f1 == 0.0);
  CHECK(m.per_relation[2].f1 == 0.0);  // zero-activity scores zero
  CHECK(m.macro == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  REQUIRE(m.at500.has_value());  // R1 (250) and R2 (40)
  CHECK(*m.at500 == 0.0);
  REQUIRE(m.at200.has_value());  // R2 only
  CHECK(*m.at200 == 0.0);
  REQUIRE(m.at100.has_value());
  CHECK(*m.at100 == 0.0);

  // bucket containment: @100 subset of @200 subset of @500
  auto bucket_of = [&](int64_t k) {
    std::set<int> b;
    for (int r = 0; r < 3; ++r)
      if (idx.rel_freq[static_cast<size_t>(r)] < k) b.insert(r);
    return b;
  };
  const auto b100 = bucket_of(100), b200 = bucket_of(200), b500 = bucket_of(500);
  CHECK(std::includes(b200.begin(), b200.end(), b100.begin(), b100.end()));
  CHECK(std::includes(b500.begin(), b500.end(), b200.begin(), b200.end()));

  // all frequencies >= K: the bucket is absent
  TrainIndex heavy;
  heavy.rel_freq = {600, 700, 800, 0};
  const MacroScores m2 = macro_scores(records, 0.5, heavy, schema);
  CHECK(!m2.at500.has_value());
  CHECK(!m2.at200.has_value());
  CHECK(!m2.at100.has_value());
}

TEST_CASE("micro f1 against a brute-force recount on random sets") {
  const Corpus corpus = nameless_corpus(4);
  TrainIndex empty_index;
  empty_index.rel_freq.assign(7, 0);
  for (uint64_t seed = 100; seed < 110; ++seed) {
    auto records = random_records(120, seed);
    // dedupe (doc,h,t,rel) coordinates keeping the first
    std::set<std::tuple<int, int, int, int>> seen;
    std::vector<PredRecord> unique;
    for (const auto& r : records)
      if (seen.insert({r.doc, r.head, r.tail, r.rel}).second) unique.push_back(r);
    const double theta = 0.5;
    int64_t tp = 0, pred = 0, gold = 0;
    for (const auto& r : unique) {
      pred += r.prob > theta ? 1 : 0;
      gold += r.gold ? 1 : 0;
      tp += (r.prob > theta && r.gold) ? 1 : 0;
    }
    if (gold == 0) continue;
    const MicroScores s = micro_scores(unique, theta, corpus, empty_index);
    const double p = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
    const double rc = static_cast<double>(tp) / static_cast<double>(gold);
    const double f1 = (p + rc) == 0 ? 0 : 2 * p * rc / (p + rc);
    CHECK(s.f1 == doctest::Approx(f1).epsilon(1e-12));
    CHECK(s.ign_f1 == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("raising the threshold never increases recall") {
  const auto records = random_records(200, 7);
  const Corpus corpus = nameless_corpus(4);
  TrainIndex idx;
  idx.rel_freq.assign(7, 0);
  double prev_recall = 1.0;
  for (double theta = 0.0; theta <= 1.0; theta += 0.05) {
    const MicroScores s = micro_scores(records, theta, corpus, idx);
    CHECK(s.recall <= prev_recall + 1e-15);
    prev_recall = s.recall;
  }
}
