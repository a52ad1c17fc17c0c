#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metrics.hpp"

namespace prism {

// One binary calibration instance: a (pair, relation) coordinate with
// confidence = predicted probability and correctness = gold flag.
struct CalInstance {
  double confidence = 0.0;
  bool correct = false;
  int cls = 0;  // schema index of the coordinate's relation
};

enum class CalPopulation {
  kAllCoordinates,     // every (pair, relation) coordinate
  kPredictedPositive,  // only coordinates with probability > threshold
};

std::vector<CalInstance> calibration_instances(const Predictions& preds,
                                               const RelationSchema& schema, bool model_na,
                                               CalPopulation population,
                                               double threshold = 0.5);

// Expected calibration error over B fixed-width bins; empty bins contribute 0.
double ece(const std::vector<CalInstance>& instances, int bins);

// Adaptive calibration error: per class, equal-population confidence ranges
// (remainder spread across the leading ranges; classes with fewer instances
// than ranges use one range per instance). Mean absolute gap over all
// realized (range, class) cells.
double ace(const std::vector<CalInstance>& instances, int ranges);

struct BinnedTable {
  struct Bin {
    double lo = 0.0, hi = 0.0;
    int64_t count = 0;
    double confidence = 0.0;  // mean predicted probability in the bin
    double accuracy = 0.0;    // empirical positive rate in the bin
  };
  std::vector<Bin> bins;
  int64_t total = 0;
  // Count-weighted mean |accuracy - confidence| (the table's ECE).
  double mean_gap() const;
};

BinnedTable bin_fixed(const std::vector<CalInstance>& instances, int bins);

// Frequency grouping for reliability diagrams: NA, the top_k most frequent
// non-NA relations by train count, and the remaining tail relations.
struct FrequencyGroups {
  std::vector<int> group_of;  // schema index -> 0 = NA, 1 = head, 2 = tail
  static constexpr const char* kNames[3] = {"na", "top", "tail"};
};

FrequencyGroups frequency_groups(const RelationSchema& schema, const TrainIndex& train,
                                 int top_k = 7);

std::map<std::string, BinnedTable> reliability_tables(const std::vector<CalInstance>& instances,
                                                      const FrequencyGroups& groups, int bins);

void write_reliability_csv(const std::string& path,
                           const std::map<std::string, BinnedTable>& tables);

// Post-hoc calibrators fitted on development logits. A plain temperature is
// alpha = 0; class-distribution-aware scaling varies the temperature with
// the class's train frequency: T_k = T * (1 + alpha * log(f_max / f_k)).
struct TemperatureModel {
  double temperature = 1.0;
  double alpha = 0.0;
  std::vector<double> class_temperature;  // resolved per schema index

  double temperature_for(int cls) const {
    return class_temperature.empty() ? temperature
                                     : class_temperature[static_cast<size_t>(cls)];
  }
};

struct CalSample {
  double logit = 0.0;
  bool positive = false;
  int cls = 0;
};

double bce_of(const std::vector<CalSample>& samples, const TemperatureModel& model);

// Scalar temperature minimizing dev BCE of sigmoid(logit / T), bounded
// search on T in [0.05, 20]. T = 1 is always a candidate, so the fitted BCE
// never exceeds the uncalibrated one.
TemperatureModel fit_temperature(const std::vector<CalSample>& dev);

// Joint (T, alpha) fit over an alpha grid that includes 0, so the result is
// never worse on dev than plain temperature scaling. Frequencies are floored
// at 1.
TemperatureModel fit_cda_temperature(const std::vector<CalSample>& dev,
                                     const std::vector<int64_t>& class_freq);

double apply_temperature(double logit, double t);

}  // namespace prism
