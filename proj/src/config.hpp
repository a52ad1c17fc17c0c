#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "trainer.hpp"

namespace prism {

// Whole-experiment configuration: a key-value tree with section headers,
// loadable from a config file with command-line overrides on top. The
// effective config is echoed into every output directory.
struct ExperimentConfig {
  struct Data {
    std::string corpus;   // single file carved by `split`
    std::string train;    // or explicit per-split files
    std::string dev;
    std::string test;
    std::string schema;
    std::vector<int> split = {0, 0, 0};  // train/dev/test doc counts for `corpus`
    int subsample = 0;                   // 0 = off
    double subsample_tolerance = 0.05;
    uint64_t subsample_seed = 0;
  } data;

  EncoderConfig encoder;
  HeadConfig head;
  TrainConfig train;

  struct Calibration {
    int bins = 10;
    int ranges = 10;
    std::string method = "none";      // none | ts | cda-ts
    std::string population = "all";   // all | positive
    int top_k = 7;
  } calibration;

  uint64_t seed = 0;

  void validate() const;
  // One "section.key=value" assignment; throws ConfigError on unknown keys.
  void set(const std::string& key, const std::string& value);
  std::string echo() const;

  static ExperimentConfig from_file(const std::string& path);
  void apply_file(const std::string& path);
};

}  // namespace prism
