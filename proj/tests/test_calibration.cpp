#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "calibration.hpp"
#include "rng.hpp"

using namespace prism;

namespace {

// Naive double-loop ECE oracle: for every bin, scan the whole list.
double ece_oracle(const std::vector<CalInstance>& ins, int bins) {
  double e = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins;
    const double hi = static_cast<double>(b + 1) / bins;
    double conf = 0, acc = 0;
    int64_t n = 0;
    for (const auto& i : ins) {
      const bool inside = b == bins - 1 ? (i.confidence >= lo) : (i.confidence >= lo && i.confidence < hi);
      if (!inside) continue;
      ++n;
      conf += i.confidence;
      acc += i.correct ? 1 : 0;
    }
    if (n > 0)
      e += static_cast<double>(n) / static_cast<double>(ins.size()) *
           std::abs(acc / static_cast<double>(n) - conf / static_cast<double>(n));
  }
  return e;
}

// Naive ACE oracle following the equal-population definition directly.
double ace_oracle(const std::vector<CalInstance>& ins, int ranges) {
  std::map<int, std::vector<CalInstance>> by_class;
  for (const auto& i : ins) by_class[i.cls].push_back(i);
  double gap = 0;
  int64_t cells = 0;
  for (auto& [cls, list] : by_class) {
    (void)cls;
    std::stable_sort(list.begin(), list.end(),
                     [](const CalInstance& a, const CalInstance& b) {
                       return a.confidence < b.confidence;
                     });
    const int64_t n = static_cast<int64_t>(list.size());
    const int64_t r_eff = std::min<int64_t>(ranges, n);
    int64_t start = 0;
    for (int64_t r = 0; r < r_eff; ++r) {
      const int64_t len = n / r_eff + (r < n % r_eff ? 1 : 0);
      double conf = 0, acc = 0;
      for (int64_t i = start; i < start + len; ++i) {
        conf += list[static_cast<size_t>(i)].confidence;
        acc += list[static_cast<size_t>(i)].correct ? 1 : 0;
      }
      gap += std::abs(acc / static_cast<double>(len) - conf / static_cast<double>(len));
      ++cells;
      start += len;
    }
  }
  return gap / static_cast<double>(cells);
}

std::vector<CalInstance> random_instances(int n, uint64_t seed, int classes = 4) {
  Rng rng(seed);
  std::vector<CalInstance> out;
  for (int i = 0; i < n; ++i)
    out.push_back({rng.uniform(), rng.uniform() < 0.4, static_cast<int>(rng.below(classes))});
  return out;
}

// Instances whose correctness is drawn with probability equal to their
// confidence: calibrated by construction.
std::vector<CalInstance> calibrated_instances(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<CalInstance> out;
  for (int i = 0; i < n; ++i) {
    const double c = rng.uniform();
    out.push_back({c, rng.uniform() < c, static_cast<int>(rng.below(3))});
  }
  return out;
}

}  // namespace

TEST_CASE("ece: hand case, perfect calibration, brute-force equivalence") {
  // 10 instances, all confidence 0.8, 6 correct, 10 bins -> |0.6 - 0.8| = 0.2
  std::vector<CalInstance> hand;
  for (int i = 0; i < 10; ++i) hand.push_back({0.8, i < 6, 0});
  CHECK(ece(hand, 10) == doctest::Approx(0.2).epsilon(1e-15));

  // per-bin confidence exactly matching accuracy -> 0
  std::vector<CalInstance> perfect;
  for (int b = 0; b < 10; ++b) {
    const double conf = 0.05 + 0.1 * b;  // bin midpoints
    const int correct = static_cast<int>(std::lround(conf * 20));
    for (int i = 0; i < 20; ++i) perfect.push_back({conf, i < correct, 0});
  }
  CHECK(ece(perfect, 10) == doctest::Approx(0.0).epsilon(1e-12));

  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const auto ins = random_instances(300, seed);
    CHECK(std::abs(ece(ins, 10) - ece_oracle(ins, 10)) < 1e-12);
    CHECK(std::abs(ece(ins, 7) - ece_oracle(ins, 7)) < 1e-12);
  }
  CHECK_THROWS_AS(ece({}, 10), DataError);
}

TEST_CASE("ace: hand case and brute-force equivalence") {
  // one class,4 instances conf {.1,.2,.9,1.0}, correct {0,0,1,1}, R=2
  const std::vector<CalInstance> hand = {
      {0.1, false, 0}, {0.2, false, 0}, {0.9, true, 0}, {1.0, true, 0}};
  CHECK(ace(hand, 2) == doctest::Approx(0.1).epsilon(1e-15));

  // uniform correctness matching confidence -> 0
  const std::vector<CalInstance> flat = {{0.5, true, 0}, {0.5, false, 0}};
  CHECK(ace(flat, 1) == doctest::Approx(0.0).epsilon(1e-15));

  for (uint64_t seed = 20; seed <= 32; ++seed) {
    const auto ins = random_instances(100, seed);
    CHECK(std::abs(ace(ins, 10) - ace_oracle(ins, 10)) < 1e-12);
    CHECK(std::abs(ace(ins, 3) - ace_oracle(ins, 3)) < 1e-12);
  }
  // classes with fewer instances than ranges fall back to singleton ranges
  const std::vector<CalInstance> tiny = {{0.3, false, 0}, {0.9, true, 1}};
  CHECK(ace(tiny, 10) == doctest::Approx((0.3 + 0.1) / 2.0).epsilon(1e-12));
}

TEST_CASE("binned tables partition instances; empty groups give empty tables") {
  const auto ins = random_instances(500, 3, 6);
  const BinnedTable table = bin_fixed(ins, 10);
  CHECK(table.total == 500);
  int64_t n = 0;
  for (const auto& b : table.bins) n += b.count;
  CHECK(n == 500);

  const BinnedTable empty = bin_fixed({}, 10);
  CHECK(empty.total == 0);

  // grouping covers every class exactly once
  RelationSchema schema = RelationSchema::from_entries({{"R0", "a", "x"},
                                                        {"R1", "b", "y"},
                                                        {"R2", "c", "z"},
                                                        {"R3", "d", "w"}});
  TrainIndex idx;
  idx.rel_freq = {50, 900, 10, 2, 0};
  const FrequencyGroups groups = frequency_groups(schema, idx, 2);
  CHECK(groups.group_of[static_cast<size_t>(schema.na_index())] == 0);
  int head = 0, tail = 0;
  for (int r = 0; r < 4; ++r) (groups.group_of[static_cast<size_t>(r)] == 1 ? head : tail)++;
  CHECK(head == 2);
  CHECK(tail == 2);
  CHECK(groups.group_of[1] == 1);  // most frequent
  CHECK(groups.group_of[0] == 1);  // second

  std::vector<CalInstance> all = random_instances(400, 9, 5);
  const auto tables = reliability_tables(all, groups, 10);
  CHECK(tables.at("na").total + tables.at("top").total + tables.at("tail").total == 400);

  // calibrated synthetic predictions: per-bin acc tracks conf
  const auto cal = calibrated_instances(60000, 11);
  const BinnedTable ct = bin_fixed(cal, 10);
  for (const auto& b : ct.bins)
    if (b.count > 1000) CHECK(std::abs(b.accuracy - b.confidence) < 0.02);
}

TEST_CASE("temperature scaling: identity, recovery, covariance, never hurts") {
  // logits produced as true log-odds: already calibrated, T should be ~1
  Rng rng(41);
  std::vector<CalSample> dev;
  for (int i = 0; i < 4000; ++i) {
    const double p = 0.02 + 0.96 * rng.uniform();
    const double logit = std::log(p / (1 - p));
    dev.push_back({logit, rng.uniform() < p, static_cast<int>(rng.below(3))});
  }
  const TemperatureModel t1 = fit_temperature(dev);
  CHECK(t1.temperature == doctest::Approx(1.0).epsilon(0.08));

  // doubled logits fit roughly double the temperature
  std::vector<CalSample> doubled = dev;
  for (auto& s : doubled) s.logit *= 2.0;
  const TemperatureModel t2 = fit_temperature(doubled);
  CHECK(t2.temperature == doctest::Approx(2.0 * t1.temperature).epsilon(0.08));

  // T fixed at 1 reproduces the uncalibrated probabilities exactly
  for (const auto& s : dev) {
    const double direct = 1.0 / (1.0 + std::exp(-s.logit));
    CHECK(apply_temperature(s.logit, 1.0) == doctest::Approx(direct).epsilon(1e-15));
  }

  // fitted BCE never exceeds the uncalibrated BCE
  TemperatureModel unit;
  CHECK(bce_of(dev, t1) <= bce_of(dev, unit) + 1e-12);

  CHECK_THROWS_AS(fit_temperature({{0.3, true, 0}, {0.1, true, 0}}), DataError);
}

TEST_CASE("cda-ts: reduces to ts at alpha 0, uniform freqs, nested fit wins") {
  Rng rng(55);
  // long-tailed miscalibration: rare classes systematically overconfident
  std::vector<CalSample> dev;
  const std::vector<int64_t> freq = {1000, 200, 20, 0};
  for (int i = 0; i < 6000; ++i) {
    const int cls = static_cast<int>(rng.below(3));
    const double p_true = 0.05 + 0.9 * rng.uniform();
    const double sharpen = cls == 0 ? 1.0 : (cls == 1 ? 2.0 : 4.0);
    dev.push_back({sharpen * std::log(p_true / (1 - p_true)), rng.uniform() < p_true, cls});
  }
  const TemperatureModel ts = fit_temperature(dev);
  const TemperatureModel cda = fit_cda_temperature(dev, freq);
  CHECK(bce_of(dev, cda) <= bce_of(dev, ts) + 1e-9);

  // alpha = 0 resolves every class to the shared temperature
  TemperatureModel at_zero;
  at_zero.temperature = 1.7;
  at_zero.alpha = 0.0;
  at_zero.class_temperature = {1.7, 1.7, 1.7, 1.7};
  for (int c = 0; c < 4; ++c) CHECK(at_zero.temperature_for(c) == 1.7);

  // uniform class frequencies give equal per-class temperatures
  const TemperatureModel uniform = fit_cda_temperature(dev, {100, 100, 100, 100});
  for (size_t c = 1; c < uniform.class_temperature.size(); ++c)
    CHECK(uniform.class_temperature[c] == uniform.class_temperature[0]);
}

TEST_CASE("reports are reproducible: identical instances, identical numbers") {
  const auto a = random_instances(256, 77);
  const auto b = random_instances(256, 77);
  CHECK(ece(a, 10) == ece(b, 10));
  CHECK(ace(a, 10) == ace(b, 10));
}
