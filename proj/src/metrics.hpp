#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"

namespace prism {

// One (document, head, tail, relation) coordinate with its predicted
// probability and gold flag. NA is excluded from scored predictions.
struct PredRecord {
  int doc = 0;  // index into the evaluation corpus
  int head = 0;
  int tail = 0;
  int rel = 0;  // schema index, never NA
  double prob = 0.0;
  bool gold = false;
};

// Per-document dense model output; the common currency between the model,
// the metrics and the calibration module.
struct DocPredictions {
  int doc = 0;
  std::vector<std::pair<int, int>> pairs;
  int classes = 0;
  std::vector<double> probs;    // pairs x classes, row-major
  std::vector<double> logits;   // combined pre-sigmoid scores
  std::vector<uint8_t> gold;    // binary targets
};

using Predictions = std::vector<DocPredictions>;

// Train-split derived side information: the gold fact index for Ign F1
// (keyed by mention names, over all name combinations of a triple's
// entities) and per-relation gold triple counts for Macro@K and grouping.
struct TrainIndex {
  std::unordered_set<std::string> facts;
  std::vector<int64_t> rel_freq;  // by schema index; NA slot stays 0
  int64_t total_triples = 0;

  static std::string key(const std::string& head_name, const std::string& tail_name, int rel);
};

TrainIndex build_train_index(const Corpus& train, const RelationSchema& schema);

std::vector<PredRecord> flatten_records(const Predictions& preds, const RelationSchema& schema,
                                        bool model_na);

struct ThresholdResult {
  double threshold = 0.0;
  double f1 = 0.0;
};

// F1-maximizing threshold over candidate values = the set of predicted
// probabilities; the predicted set at threshold t is {p > t}; ties broken
// toward the larger threshold. Throws DataError when no gold positive exists.
ThresholdResult best_threshold(const std::vector<PredRecord>& records);

struct MicroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ign_f1 = 0.0;
  int64_t predicted = 0;
  int64_t gold = 0;
  int64_t correct = 0;
};

// Exact (doc, h, t, r) match scoring at threshold. Ign F1 removes, from both
// predictions and gold, triples whose (head name, tail name, relation)
// appear in the train index.
MicroScores micro_scores(const std::vector<PredRecord>& records, double threshold,
                         const Corpus& eval_corpus, const TrainIndex& train);

struct RelationScore {
  int rel = 0;
  int64_t predicted = 0, gold = 0, correct = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MacroScores {
  double macro = 0.0;
  std::optional<double> at500;
  std::optional<double> at200;
  std::optional<double> at100;
  std::vector<RelationScore> per_relation;  // non-NA relations, schema order
};

// Uniform average of per-relation F1 over all non-NA relations (relations
// with no activity score 0); @K variants average only relations whose train
// frequency is below K and are absent when the bucket is empty.
MacroScores macro_scores(const std::vector<PredRecord>& records, double threshold,
                         const TrainIndex& train, const RelationSchema& schema);

// JSON-lines prediction export, {title, h_idx, t_idx, r, prob}; dropping the
// probability field yields the DocRED submission layout.
void write_predictions(const std::string& path, const std::vector<PredRecord>& records,
                       double threshold, const Corpus& eval_corpus, const RelationSchema& schema,
                       bool strip_prob);

}  // namespace prism
