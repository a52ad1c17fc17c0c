#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace prism {

// One textual occurrence of an entity. pos is [start, end) in word offsets
// within the sentence, matching the DocRED release layout.
struct Mention {
  std::string name;
  int sent_id = 0;
  int start = 0;
  int end = 0;
  std::string type;
};

// Gold relation between two entities; rel is an index into the schema.
struct Label {
  int head = 0;
  int tail = 0;
  int rel = 0;
  std::vector<int> evidence;
};

struct RawDocument {
  std::string title;
  std::vector<std::vector<std::string>> sents;
  std::vector<std::vector<Mention>> entities;  // vertexSet
  std::vector<Label> labels;

  int64_t ordered_pairs() const {
    const int64_t n = static_cast<int64_t>(entities.size());
    return n * (n - 1);
  }
};

using Corpus = std::vector<RawDocument>;

struct RelationInfo {
  std::string id;
  std::string name;
  std::string description;
};

// Ordered relation list with natural-language descriptions; the NA entry is
// always present and always last.
class RelationSchema {
 public:
  static constexpr const char* kNaId = "NA";
  static const char* na_description();

  // Validates entries and appends NA unless already present (idempotent).
  static RelationSchema from_entries(std::vector<RelationInfo> entries);
  static RelationSchema load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(rels_.size()); }
  int na_index() const { return size() - 1; }
  const RelationInfo& at(int i) const;
  int index_of(const std::string& id) const;  // -1 if unknown
  const std::vector<RelationInfo>& entries() const { return rels_; }

 private:
  std::vector<RelationInfo> rels_;
  std::unordered_map<std::string, int> index_;
};

// DocRED-format JSON ingestion. Every RawDocument invariant is checked at
// load time; errors name the offending document and field.
Corpus load_corpus(const std::string& path, const RelationSchema& schema);
void save_corpus(const std::string& path, const Corpus& corpus, const RelationSchema& schema);
void validate_document(const RawDocument& doc, const RelationSchema& schema);

struct CorpusStats {
  int64_t documents = 0;
  int relation_types = 0;  // schema size including NA
  int64_t total_pairs = 0;
  int64_t na_pairs = 0;
  double na_ratio = 0.0;  // labelled over ordered pairs, h != t
  int64_t total_triples = 0;
  std::vector<int64_t> triples_per_relation;  // indexed by schema position
};

CorpusStats compute_stats(const Corpus& corpus, const RelationSchema& schema);
void save_stats(const std::string& path, const CorpusStats& stats, const RelationSchema& schema);

struct SubsampleResult {
  std::vector<int> indices;  // positions into the source corpus, ascending
  uint64_t seed = 0;
  double distance = 0.0;  // L1 between non-NA relation distributions
  int attempts = 0;
};

// Repeated uniform sampling until the subset's non-NA relation-frequency
// distribution is within `tolerance` L1 distance of the full corpus.
SubsampleResult subsample(const Corpus& corpus, const RelationSchema& schema, int n,
                          uint64_t seed, double tolerance = 0.05, int max_attempts = 1000);

Corpus take(const Corpus& corpus, const std::vector<int>& indices);

struct SyntheticConfig {
  int documents = 100;
  int vocabulary = 200;  // filler word count
  int relations = 12;    // non-NA relation count
  double zipf_exponent = 1.2;
  double na_ratio = 0.95;
  double mean_entities = 4.0;
  uint64_t seed = 0;
};

struct SyntheticData {
  Corpus corpus;
  RelationSchema schema;
};

// Long-tailed synthetic corpus. Relation evidence is carried by per-relation
// trigger tokens placed between the two mentions, and the schema descriptions
// reuse the same triggers so description similarity is learnable.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

}  // namespace prism
