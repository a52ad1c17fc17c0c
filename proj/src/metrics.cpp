#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace prism {

std::string TrainIndex::key(const std::string& head_name, const std::string& tail_name, int rel) {
  return head_name + '\x1f' + tail_name + '\x1f' + std::to_string(rel);
}

TrainIndex build_train_index(const Corpus& train, const RelationSchema& schema) {
  TrainIndex idx;
  idx.rel_freq.assign(static_cast<size_t>(schema.size()), 0);
  for (const RawDocument& doc : train)
    for (const Label& l : doc.labels) {
      idx.rel_freq[static_cast<size_t>(l.rel)] += 1;
      idx.total_triples += 1;
      for (const Mention& hm : doc.entities[static_cast<size_t>(l.head)])
        for (const Mention& tm : doc.entities[static_cast<size_t>(l.tail)])
          idx.facts.insert(TrainIndex::key(hm.name, tm.name, l.rel));
    }
  return idx;
}

std::vector<PredRecord> flatten_records(const Predictions& preds, const RelationSchema& schema,
                                        bool model_na) {
  std::vector<PredRecord> out;
  const int classes = model_na ? schema.size() : schema.size() - 1;
  const int scored = schema.size() - 1;  // NA never scored
  for (const DocPredictions& dp : preds) {
    if (dp.classes != classes) throw StateError("prediction class count mismatch");
    for (size_t p = 0; p < dp.pairs.size(); ++p)
      for (int r = 0; r < scored; ++r) {
        PredRecord rec;
        rec.doc = dp.doc;
        rec.head = dp.pairs[p].first;
        rec.tail = dp.pairs[p].second;
        rec.rel = r;
        rec.prob = dp.probs[p * static_cast<size_t>(classes) + static_cast<size_t>(r)];
        rec.gold = dp.gold[p * static_cast<size_t>(classes) + static_cast<size_t>(r)] != 0;
        out.push_back(rec);
      }
  }
  return out;
}

ThresholdResult best_threshold(const std::vector<PredRecord>& records) {
  if (records.empty()) throw DataError("cannot tune a threshold on an empty prediction set");
  int64_t total_gold = 0;
  for (const PredRecord& r : records) total_gold += r.gold ? 1 : 0;
  if (total_gold == 0)
    throw DataError("cannot tune a threshold without gold positives (F1 undefined)");

  // Sort descending; sweeping distinct probabilities t evaluates the
  // predicted set {p > t}, i.e. the strict prefix above each value.
  std::vector<const PredRecord*> sorted;
  sorted.reserve(records.size());
  for (const PredRecord& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const PredRecord* a, const PredRecord* b) { return a->prob > b->prob; });

  ThresholdResult best{sorted.front()->prob, 0.0};
  int64_t tp = 0, predicted = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    // Evaluate threshold = prob of this tie group; the group itself is
    // excluded by the strict inequality.
    const double theta = sorted[i]->prob;
    const double precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_gold);
    const double f1 = (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    // Strictly-better update; equal F1 keeps the earlier (larger) threshold.
    if (f1 > best.f1) best = {theta, f1};
    while (i < sorted.size() && sorted[i]->prob == theta) {
      tp += sorted[i]->gold ? 1 : 0;
      ++predicted;
      ++i;
    }
  }
  return best;
}

namespace {

struct Counts {
  int64_t tp = 0, predicted = 0, gold = 0;
  double precision() const {
    return predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
  }
  double recall() const {
    return gold == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold);
  }
  double f1() const {
    const double p = precision(), r = recall();
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

bool in_train(const PredRecord& rec, const Corpus& eval_corpus, const TrainIndex& train) {
  const RawDocument& doc = eval_corpus[static_cast<size_t>(rec.doc)];
  for (const Mention& hm : doc.entities[static_cast<size_t>(rec.head)])
    for (const Mention& tm : doc.entities[static_cast<size_t>(rec.tail)])
      if (train.facts.count(TrainIndex::key(hm.name, tm.name, rec.rel))) return true;
  return false;
}

}  // namespace

MicroScores micro_scores(const std::vector<PredRecord>& records, double threshold,
                         const Corpus& eval_corpus, const TrainIndex& train) {
  Counts all, ign;
  for (const PredRecord& rec : records) {
    const bool predicted = rec.prob > threshold;
    all.predicted += predicted ? 1 : 0;
    all.gold += rec.gold ? 1 : 0;
    all.tp += (predicted && rec.gold) ? 1 : 0;
    if ((predicted || rec.gold) && in_train(rec, eval_corpus, train)) continue;
    ign.predicted += predicted ? 1 : 0;
    ign.gold += rec.gold ? 1 : 0;
    ign.tp += (predicted && rec.gold) ? 1 : 0;
  }
  MicroScores out;
  out.precision = all.precision();
  out.recall = all.recall();
  out.f1 = all.f1();
  out.ign_f1 = ign.f1();
  out.predicted = all.predicted;
  out.gold = all.gold;
  out.correct = all.tp;
  return out;
}

MacroScores macro_scores(const std::vector<PredRecord>& records, double threshold,
                         const TrainIndex& train, const RelationSchema& schema) {
  const int non_na = schema.size() - 1;
  std::vector<Counts> per(static_cast<size_t>(non_na));
  for (const PredRecord& rec : records) {
    Counts& c = per[static_cast<size_t>(rec.rel)];
    const bool predicted = rec.prob > threshold;
    c.predicted += predicted ? 1 : 0;
    c.gold += rec.gold ? 1 : 0;
    c.tp += (predicted && rec.gold) ? 1 : 0;
  }
  MacroScores out;
  double sum = 0.0;
  for (int r = 0; r < non_na; ++r) {
    const Counts& c = per[static_cast<size_t>(r)];
    RelationScore rs;
    rs.rel = r;
    rs.predicted = c.predicted;
    rs.gold = c.gold;
    rs.correct = c.tp;
    rs.precision = c.precision();
    rs.recall = c.recall();
    rs.f1 = c.f1();
    out.per_relation.push_back(rs);
    sum += rs.f1;
  }
  out.macro = non_na == 0 ? 0.0 : sum / static_cast<double>(non_na);

  auto bucket = [&](int64_t k) -> std::optional<double> {
    double s = 0.0;
    int count = 0;
    for (int r = 0; r < non_na; ++r)
      if (train.rel_freq[static_cast<size_t>(r)] < k) {
        s += out.per_relation[static_cast<size_t>(r)].f1;
        ++count;
      }
    if (count == 0) return std::nullopt;
    return s / static_cast<double>(count);
  };
  out.at500 = bucket(500);
  out.at200 = bucket(200);
  out.at100 = bucket(100);
  return out;
}

void write_predictions(const std::string& path, const std::vector<PredRecord>& records,
                       double threshold, const Corpus& eval_corpus, const RelationSchema& schema,
                       bool strip_prob) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions file: " + path);
  for (const PredRecord& rec : records) {
    if (!(rec.prob > threshold)) continue;
    nlohmann::json j;
    j["title"] = eval_corpus[static_cast<size_t>(rec.doc)].title;
    j["h_idx"] = rec.head;
    j["t_idx"] = rec.tail;
    j["r"] = schema.at(rec.rel).id;
    if (!strip_prob) j["prob"] = rec.prob;
    out << j.dump() << "\n";
  }
}

}  // namespace prism
