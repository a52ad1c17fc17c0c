#include "calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace prism {

std::vector<CalInstance> calibration_instances(const Predictions& preds,
                                               const RelationSchema& schema, bool model_na,
                                               CalPopulation population, double threshold) {
  std::vector<CalInstance> out;
  const int classes = model_na ? schema.size() : schema.size() - 1;
  for (const DocPredictions& dp : preds) {
    if (dp.classes != classes) throw StateError("prediction class count mismatch");
    for (size_t p = 0; p < dp.pairs.size(); ++p)
      for (int r = 0; r < classes; ++r) {
        const size_t at = p * static_cast<size_t>(classes) + static_cast<size_t>(r);
        if (population == CalPopulation::kPredictedPositive && !(dp.probs[at] > threshold))
          continue;
        out.push_back({dp.probs[at], dp.gold[at] != 0, r});
      }
  }
  return out;
}

double ece(const std::vector<CalInstance>& instances, int bins) {
  if (instances.empty()) throw DataError("ECE over an empty instance list");
  if (bins < 1) throw ConfigError("ECE needs at least one bin");
  std::vector<int64_t> count(static_cast<size_t>(bins), 0);
  std::vector<double> conf(static_cast<size_t>(bins), 0.0);
  std::vector<double> acc(static_cast<size_t>(bins), 0.0);
  for (const CalInstance& in : instances) {
    int b = static_cast<int>(in.confidence * bins);
    b = std::clamp(b, 0, bins - 1);  // confidence 1.0 falls into the last bin
    count[static_cast<size_t>(b)] += 1;
    conf[static_cast<size_t>(b)] += in.confidence;
    acc[static_cast<size_t>(b)] += in.correct ? 1.0 : 0.0;
  }
  double e = 0.0;
  const double total = static_cast<double>(instances.size());
  for (int b = 0; b < bins; ++b) {
    if (count[static_cast<size_t>(b)] == 0) continue;
    const double n = static_cast<double>(count[static_cast<size_t>(b)]);
    e += n / total * std::abs(acc[static_cast<size_t>(b)] / n - conf[static_cast<size_t>(b)] / n);
  }
  return e;
}

double ace(const std::vector<CalInstance>& instances, int ranges) {
  if (instances.empty()) throw DataError("ACE over an empty instance list");
  if (ranges < 1) throw ConfigError("ACE needs at least one range");
  std::map<int, std::vector<CalInstance>> by_class;
  for (const CalInstance& in : instances) by_class[in.cls].push_back(in);

  double gap_sum = 0.0;
  int64_t cells = 0;
  for (auto& [cls, list] : by_class) {
    (void)cls;
    std::stable_sort(list.begin(), list.end(), [](const CalInstance& a, const CalInstance& b) {
      return a.confidence < b.confidence;
    });
    const int64_t n = static_cast<int64_t>(list.size());
    const int64_t r_eff = std::min<int64_t>(ranges, n);
    const int64_t base = n / r_eff;
    const int64_t extra = n % r_eff;  // leading ranges take one more
    int64_t at = 0;
    for (int64_t r = 0; r < r_eff; ++r) {
      const int64_t len = base + (r < extra ? 1 : 0);
      double conf = 0.0, acc = 0.0;
      for (int64_t i = at; i < at + len; ++i) {
        conf += list[static_cast<size_t>(i)].confidence;
        acc += list[static_cast<size_t>(i)].correct ? 1.0 : 0.0;
      }
      gap_sum += std::abs(acc / static_cast<double>(len) - conf / static_cast<double>(len));
      cells += 1;
      at += len;
    }
  }
  return gap_sum / static_cast<double>(cells);
}

double BinnedTable::mean_gap() const {
  if (total == 0) return 0.0;
  double g = 0.0;
  for (const Bin& b : bins)
    if (b.count > 0)
      g += static_cast<double>(b.count) / static_cast<double>(total) *
           std::abs(b.accuracy - b.confidence);
  return g;
}

BinnedTable bin_fixed(const std::vector<CalInstance>& instances, int bins) {
  if (bins < 1) throw ConfigError("binning needs at least one bin");
  BinnedTable table;
  table.bins.resize(static_cast<size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    table.bins[static_cast<size_t>(b)].lo = static_cast<double>(b) / bins;
    table.bins[static_cast<size_t>(b)].hi = static_cast<double>(b + 1) / bins;
  }
  for (const CalInstance& in : instances) {
    int b = static_cast<int>(in.confidence * bins);
    b = std::clamp(b, 0, bins - 1);
    BinnedTable::Bin& bin = table.bins[static_cast<size_t>(b)];
    bin.count += 1;
    bin.confidence += in.confidence;
    bin.accuracy += in.correct ? 1.0 : 0.0;
  }
  for (auto& bin : table.bins) {
    if (bin.count > 0) {
      bin.confidence /= static_cast<double>(bin.count);
      bin.accuracy /= static_cast<double>(bin.count);
    }
    table.total += bin.count;
  }
  return table;
}

FrequencyGroups frequency_groups(const RelationSchema& schema, const TrainIndex& train,
                                 int top_k) {
  FrequencyGroups g;
  g.group_of.assign(static_cast<size_t>(schema.size()), 2);
  g.group_of[static_cast<size_t>(schema.na_index())] = 0;
  // Rank non-NA relations by train frequency, schema order breaking ties.
  std::vector<int> order;
  for (int r = 0; r < schema.size() - 1; ++r) order.push_back(r);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return train.rel_freq[static_cast<size_t>(a)] > train.rel_freq[static_cast<size_t>(b)];
  });
  for (int i = 0; i < std::min<int>(top_k, static_cast<int>(order.size())); ++i)
    g.group_of[static_cast<size_t>(order[static_cast<size_t>(i)])] = 1;
  return g;
}

std::map<std::string, BinnedTable> reliability_tables(const std::vector<CalInstance>& instances,
                                                      const FrequencyGroups& groups, int bins) {
  std::vector<CalInstance> split[3];
  for (const CalInstance& in : instances)
    split[groups.group_of[static_cast<size_t>(in.cls)]].push_back(in);
  std::map<std::string, BinnedTable> out;
  for (int gi = 0; gi < 3; ++gi)
    out[FrequencyGroups::kNames[gi]] = bin_fixed(split[gi], bins);
  return out;
}

void write_reliability_csv(const std::string& path,
                           const std::map<std::string, BinnedTable>& tables) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write reliability file: " + path);
  out << "group,bin_lo,bin_hi,count,confidence,accuracy\n";
  char buf[160];
  for (const auto& [name, table] : tables) {
    for (const auto& bin : table.bins) {
      if (bin.count == 0) continue;
      std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f,%lld,%.17g,%.17g\n", name.c_str(), bin.lo,
                    bin.hi, static_cast<long long>(bin.count), bin.confidence, bin.accuracy);
      out << buf;
    }
  }
}

double apply_temperature(double logit, double t) {
  const double x = logit / t;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_of(const std::vector<CalSample>& samples, const TemperatureModel& model) {
  constexpr double eps = 1e-12;
  double loss = 0.0;
  for (const CalSample& s : samples) {
    const double p =
        std::clamp(apply_temperature(s.logit, model.temperature_for(s.cls)), eps, 1.0 - eps);
    loss -= s.positive ? std::log(p) : std::log(1.0 - p);
  }
  return loss / static_cast<double>(samples.size());
}

namespace {

constexpr double kTempLo = 0.05;
constexpr double kTempHi = 20.0;

TemperatureModel with_alpha(double t, double alpha, const std::vector<int64_t>* freq) {
  TemperatureModel m;
  m.temperature = t;
  m.alpha = alpha;
  if (freq) {
    int64_t fmax = 1;
    for (int64_t f : *freq) fmax = std::max(fmax, f);
    m.class_temperature.resize(freq->size());
    for (size_t k = 0; k < freq->size(); ++k) {
      const double fk = static_cast<double>(std::max<int64_t>(1, (*freq)[k]));
      m.class_temperature[k] =
          std::max(kTempLo, t * (1.0 + alpha * std::log(static_cast<double>(fmax) / fk)));
    }
  }
  return m;
}

// Golden-section search over log T; deterministic fixed iteration count.
double best_temperature_for(const std::vector<CalSample>& dev, double alpha,
                            const std::vector<int64_t>* freq) {
  auto objective = [&](double log_t) {
    return bce_of(dev, with_alpha(std::exp(log_t), alpha, freq));
  };
  double lo = std::log(kTempLo), hi = std::log(kTempHi);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
  double fa = objective(a), fb = objective(b);
  for (int it = 0; it < 72; ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = objective(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = objective(b);
    }
  }
  const double mid = std::exp((lo + hi) / 2.0);
  // T = 1 stays a candidate so scaling can never hurt the dev BCE.
  if (bce_of(dev, with_alpha(1.0, alpha, freq)) <=
      bce_of(dev, with_alpha(mid, alpha, freq)))
    return 1.0;
  return mid;
}

}  // namespace

TemperatureModel fit_temperature(const std::vector<CalSample>& dev) {
  if (dev.empty()) throw DataError("temperature fit needs development samples");
  bool any_pos = false, any_neg = false;
  for (const CalSample& s : dev) (s.positive ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg)
    throw DataError("temperature fit needs both positive and negative dev labels");
  TemperatureModel m;
  m.temperature = best_temperature_for(dev, 0.0, nullptr);
  return m;
}

TemperatureModel fit_cda_temperature(const std::vector<CalSample>& dev,
                                     const std::vector<int64_t>& class_freq) {
  if (dev.empty()) throw DataError("temperature fit needs development samples");
  TemperatureModel best;
  double best_bce = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= 50; ++step) {
    const double alpha = -0.5 + 0.05 * step;  // includes alpha = 0 (plain TS)
    const double t = best_temperature_for(dev, alpha, &class_freq);
    const TemperatureModel cand = with_alpha(t, alpha, &class_freq);
    const double b = bce_of(dev, cand);
    if (b < best_bce) {
      best_bce = b;
      best = cand;
    }
  }
  return best;
}

}  // namespace prism
