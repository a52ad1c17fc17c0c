#include "corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"
#include "rng.hpp"

namespace prism {

using nlohmann::json;

const char* RelationSchema::na_description() {
  return "no relation holds between the two entities";
}

RelationSchema RelationSchema::from_entries(std::vector<RelationInfo> entries) {
  RelationSchema s;
  int na_at = -1;
  for (auto& e : entries) {
    if (e.id.empty()) throw DataError("schema entry with empty relation id");
    if (e.description.empty())
      throw DataError("relation '" + e.id + "' has no description");
    if (s.index_.count(e.id)) throw DataError("duplicate relation id: " + e.id);
    if (e.id == kNaId) na_at = static_cast<int>(s.rels_.size());
    s.index_[e.id] = static_cast<int>(s.rels_.size());
    s.rels_.push_back(std::move(e));
  }
  if (na_at < 0) {
    s.index_[kNaId] = static_cast<int>(s.rels_.size());
    s.rels_.push_back({kNaId, "NA", na_description()});
  } else if (na_at != static_cast<int>(s.rels_.size()) - 1) {
    // keep NA last regardless of file order
    RelationInfo na = s.rels_[static_cast<size_t>(na_at)];
    s.rels_.erase(s.rels_.begin() + na_at);
    s.rels_.push_back(std::move(na));
    s.index_.clear();
    for (size_t i = 0; i < s.rels_.size(); ++i) s.index_[s.rels_[i].id] = static_cast<int>(i);
  }
  return s;
}

RelationSchema RelationSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read schema file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("schema file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_array()) throw DataError("schema file must be a JSON array of {id, name, description}");
  std::vector<RelationInfo> entries;
  for (const auto& e : j) {
    RelationInfo r;
    if (!e.contains("id") || !e["id"].is_string())
      throw DataError("schema entry missing string field 'id'");
    r.id = e["id"].get<std::string>();
    r.name = e.value("name", r.id);
    r.description = e.value("description", std::string());
    entries.push_back(std::move(r));
  }
  return from_entries(std::move(entries));
}

void RelationSchema::save(const std::string& path) const {
  json j = json::array();
  for (const auto& r : rels_)
    j.push_back({{"id", r.id}, {"name", r.name}, {"description", r.description}});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file: " + path);
  out << j.dump(2) << "\n";
}

const RelationInfo& RelationSchema::at(int i) const {
  if (i < 0 || i >= size()) throw DataError("relation index out of range: " + std::to_string(i));
  return rels_[static_cast<size_t>(i)];
}

int RelationSchema::index_of(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

namespace {

[[noreturn]] void doc_error(const std::string& title, const std::string& field,
                            const std::string& what) {
  throw DataError("document '" + title + "', field " + field + ": " + what);
}

}  // namespace

void validate_document(const RawDocument& doc, const RelationSchema& schema) {
  const int n_sents = static_cast<int>(doc.sents.size());
  const int n_entities = static_cast<int>(doc.entities.size());
  for (int e = 0; e < n_entities; ++e) {
    if (doc.entities[static_cast<size_t>(e)].empty())
      doc_error(doc.title, "vertexSet[" + std::to_string(e) + "]", "entity has no mentions");
    for (const Mention& m : doc.entities[static_cast<size_t>(e)]) {
      if (m.sent_id < 0 || m.sent_id >= n_sents)
        doc_error(doc.title, "vertexSet[" + std::to_string(e) + "].sent_id",
                  "sentence " + std::to_string(m.sent_id) + " of " + std::to_string(n_sents));
      const int len = static_cast<int>(doc.sents[static_cast<size_t>(m.sent_id)].size());
      if (m.start < 0 || m.end > len || m.start >= m.end)
        doc_error(doc.title, "vertexSet[" + std::to_string(e) + "].pos",
                  "[" + std::to_string(m.start) + ", " + std::to_string(m.end) +
                      ") outside sentence of length " + std::to_string(len));
    }
  }
  for (const Label& l : doc.labels) {
    if (l.head < 0 || l.head >= n_entities || l.tail < 0 || l.tail >= n_entities)
      doc_error(doc.title, "labels.h/t", "entity index out of range");
    if (l.head == l.tail) doc_error(doc.title, "labels", "head equals tail");
    if (l.rel < 0 || l.rel >= schema.size()) doc_error(doc.title, "labels.r", "unknown relation");
    if (l.rel == schema.na_index())
      doc_error(doc.title, "labels.r", "NA must not appear as a gold label");
    for (int ev : l.evidence)
      if (ev < 0 || ev >= n_sents)
        doc_error(doc.title, "labels.evidence", "sentence " + std::to_string(ev) + " out of range");
  }
}

Corpus load_corpus(const std::string& path, const RelationSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("corpus file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_array()) throw DataError("corpus file must be a JSON array of documents");
  Corpus corpus;
  corpus.reserve(j.size());
  for (const auto& dj : j) {
    RawDocument doc;
    doc.title = dj.value("title", std::string());
    try {
      if (!dj.contains("sents")) throw DataError("missing 'sents'");
      for (const auto& sj : dj.at("sents")) {
        std::vector<std::string> sent;
        for (const auto& tj : sj) sent.push_back(tj.get<std::string>());
        doc.sents.push_back(std::move(sent));
      }
      if (!dj.contains("vertexSet")) throw DataError("missing 'vertexSet'");
      for (const auto& ej : dj.at("vertexSet")) {
        std::vector<Mention> mentions;
        for (const auto& mj : ej) {
          Mention m;
          m.name = mj.at("name").get<std::string>();
          m.sent_id = mj.at("sent_id").get<int>();
          const auto& pos = mj.at("pos");
          if (!pos.is_array() || pos.size() != 2) throw DataError("mention pos must be [start, end)");
          m.start = pos[0].get<int>();
          m.end = pos[1].get<int>();
          m.type = mj.value("type", std::string());
          mentions.push_back(std::move(m));
        }
        doc.entities.push_back(std::move(mentions));
      }
      if (dj.contains("labels")) {
        for (const auto& lj : dj.at("labels")) {
          Label l;
          l.head = lj.at("h").get<int>();
          l.tail = lj.at("t").get<int>();
          const std::string rid = lj.at("r").get<std::string>();
          l.rel = schema.index_of(rid);
          if (l.rel < 0) throw DataError("unknown relation id '" + rid + "'");
          if (lj.contains("evidence"))
            for (const auto& ev : lj.at("evidence")) l.evidence.push_back(ev.get<int>());
          doc.labels.push_back(std::move(l));
        }
      }
    } catch (const json::exception& e) {
      throw DataError("document '" + doc.title + "': malformed record: " + e.what());
    }
    validate_document(doc, schema);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus, const RelationSchema& schema) {
  json j = json::array();
  for (const RawDocument& doc : corpus) {
    json dj;
    dj["title"] = doc.title;
    dj["sents"] = doc.sents;
    json vs = json::array();
    for (const auto& mentions : doc.entities) {
      json ej = json::array();
      for (const Mention& m : mentions)
        ej.push_back({{"name", m.name},
                      {"sent_id", m.sent_id},
                      {"pos", {m.start, m.end}},
                      {"type", m.type}});
      vs.push_back(std::move(ej));
    }
    dj["vertexSet"] = std::move(vs);
    json ls = json::array();
    for (const Label& l : doc.labels)
      ls.push_back({{"h", l.head},
                    {"t", l.tail},
                    {"r", schema.at(l.rel).id},
                    {"evidence", l.evidence}});
    dj["labels"] = std::move(ls);
    j.push_back(std::move(dj));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  out << j.dump(2) << "\n";
}

CorpusStats compute_stats(const Corpus& corpus, const RelationSchema& schema) {
  CorpusStats s;
  s.documents = static_cast<int64_t>(corpus.size());
  s.relation_types = schema.size();
  s.triples_per_relation.assign(static_cast<size_t>(schema.size()), 0);
  for (const RawDocument& doc : corpus) {
    s.total_pairs += doc.ordered_pairs();
    std::set<std::pair<int, int>> labelled;
    for (const Label& l : doc.labels) {
      s.total_triples += 1;
      s.triples_per_relation[static_cast<size_t>(l.rel)] += 1;
      labelled.insert({l.head, l.tail});
    }
    s.na_pairs += doc.ordered_pairs() - static_cast<int64_t>(labelled.size());
  }
  s.na_ratio = s.total_pairs == 0 ? 0.0
                                  : static_cast<double>(s.na_pairs) /
                                        static_cast<double>(s.total_pairs);
  return s;
}

void save_stats(const std::string& path, const CorpusStats& stats, const RelationSchema& schema) {
  json per_rel = json::object();
  for (int r = 0; r < schema.size(); ++r)
    per_rel[schema.at(r).id] = stats.triples_per_relation[static_cast<size_t>(r)];
  json j = {{"documents", stats.documents},
            {"relation_types", stats.relation_types},
            {"total_pairs", stats.total_pairs},
            {"na_pairs", stats.na_pairs},
            {"na_ratio", stats.na_ratio},
            {"total_triples", stats.total_triples},
            {"triples_per_relation", per_rel}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write stats file: " + path);
  out << j.dump(2) << "\n";
}

namespace {

// Normalized non-NA relation frequencies over the schema.
std::vector<double> relation_distribution(const Corpus& corpus, int n_relations) {
  std::vector<double> counts(static_cast<size_t>(n_relations), 0.0);
  double total = 0.0;
  for (const RawDocument& doc : corpus)
    for (const Label& l : doc.labels) {
      counts[static_cast<size_t>(l.rel)] += 1.0;
      total += 1.0;
    }
  if (total > 0.0)
    for (double& c : counts) c /= total;
  return counts;
}

double l1_distance(const Corpus& full_dist_src, const std::vector<double>& full,
                   const std::vector<double>& sub) {
  (void)full_dist_src;
  double d = 0.0;
  for (size_t i = 0; i < full.size(); ++i) d += std::abs(full[i] - sub[i]);
  return d;
}

}  // namespace

SubsampleResult subsample(const Corpus& corpus, const RelationSchema& schema, int n,
                          uint64_t seed, double tolerance, int max_attempts) {
  if (n < 0 || n > static_cast<int>(corpus.size()))
    throw ConfigError("subsample size " + std::to_string(n) + " exceeds corpus of " +
                      std::to_string(corpus.size()));
  const int non_na = schema.size() - 1;
  const std::vector<double> full = relation_distribution(corpus, non_na);
  Rng rng = Rng::substream(seed, "subsample");
  std::vector<int> all(corpus.size());
  std::iota(all.begin(), all.end(), 0);

  SubsampleResult best;
  best.seed = seed;
  best.distance = std::numeric_limits<double>::infinity();
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::vector<int> pool = all;
    rng.shuffle(pool);
    std::vector<int> pick(pool.begin(), pool.begin() + n);
    std::sort(pick.begin(), pick.end());
    const Corpus subset = take(corpus, pick);
    const double d = l1_distance(corpus, full, relation_distribution(subset, non_na));
    if (d < best.distance) {
      best.indices = pick;
      best.distance = d;
      best.attempts = attempt;
    }
    if (d <= tolerance) {
      best.indices = std::move(pick);
      best.distance = d;
      best.attempts = attempt;
      return best;
    }
  }
  throw DataError("subsample: no subset within tolerance " + std::to_string(tolerance) + " after " +
                  std::to_string(max_attempts) + " attempts; best distance " +
                  std::to_string(best.distance));
}

Corpus take(const Corpus& corpus, const std::vector<int>& indices) {
  Corpus out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(corpus[static_cast<size_t>(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

struct PlannedSentence {
  std::vector<std::string> words;
  // (entity, word offset of the single-token mention)
  std::vector<std::pair<int, int>> mentions;
  bool is_evidence = false;
  int evidence_head = -1, evidence_tail = -1, evidence_rel = -1;
};

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.documents < 1) throw ConfigError("synthetic corpus needs at least one document");
  if (cfg.relations < 2) throw ConfigError("synthetic corpus needs at least two relations");
  if (cfg.vocabulary < 8) throw ConfigError("synthetic vocabulary must have at least 8 words");
  if (!(cfg.na_ratio > 0.0 && cfg.na_ratio < 1.0))
    throw ConfigError("na ratio must lie strictly inside (0, 1), got " +
                      std::to_string(cfg.na_ratio));
  if (cfg.mean_entities < 2.0)
    throw ConfigError("mean entities per document must be at least 2");
  if (cfg.zipf_exponent <= 0.0) throw ConfigError("zipf exponent must be positive");

  std::vector<RelationInfo> rels;
  for (int r = 0; r < cfg.relations; ++r) {
    char id[16], name[16];
    std::snprintf(id, sizeof id, "R%02d", r);
    std::snprintf(name, sizeof name, "rel%02d", r);
    char trig_a[16], trig_b[16];
    std::snprintf(trig_a, sizeof trig_a, "trg%02da", r);
    std::snprintf(trig_b, sizeof trig_b, "trg%02db", r);
    RelationInfo info;
    info.id = id;
    info.name = name;
    info.description = std::string(trig_a) + " " + trig_b + " relation";
    rels.push_back(std::move(info));
  }
  RelationSchema schema = RelationSchema::from_entries(std::move(rels));

  Rng rng = Rng::substream(cfg.seed, "synth");
  auto filler = [&]() {
    char w[16];
    std::snprintf(w, sizeof w, "w%04d", static_cast<int>(rng.below(static_cast<uint64_t>(cfg.vocabulary))));
    return std::string(w);
  };

  // Entity name pool sized so each name recurs a handful of times across
  // documents: embeddings get trained and evaluation names are in-vocabulary,
  // but relations are assigned independently of names, so names carry no
  // label signal. Repeats also exercise train/eval fact overlap (Ign F1).
  const int pool_size = std::max(24, static_cast<int>(cfg.documents * cfg.mean_entities / 4.0));
  std::vector<std::string> pool;
  pool.reserve(static_cast<size_t>(pool_size));
  for (int i = 0; i < pool_size; ++i) {
    char w[16];
    std::snprintf(w, sizeof w, "ent%04d", i);
    pool.push_back(w);
  }

  // Draw entity counts first so the gold-triple quota can be exact.
  const int spread = std::max(0, static_cast<int>(std::lround(cfg.mean_entities)) - 2);
  std::vector<std::vector<int>> doc_entities(static_cast<size_t>(cfg.documents));
  int64_t total_pairs = 0;
  for (auto& ents : doc_entities) {
    const int n = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(2 * spread + 1)));
    std::vector<int> ids(pool.size());
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    ents.assign(ids.begin(), ids.begin() + n);
    total_pairs += static_cast<int64_t>(n) * (n - 1);
  }

  const int64_t gold_quota = std::llround((1.0 - cfg.na_ratio) * static_cast<double>(total_pairs));
  if (gold_quota < 1)
    throw ConfigError("na ratio " + std::to_string(cfg.na_ratio) +
                      " leaves no positive pairs for " + std::to_string(total_pairs) +
                      " ordered pairs; lower it or raise entity counts");

  struct PairRef {
    int doc, h, t;
  };
  std::vector<PairRef> pairs;
  pairs.reserve(static_cast<size_t>(total_pairs));
  for (int d = 0; d < cfg.documents; ++d) {
    const int n = static_cast<int>(doc_entities[static_cast<size_t>(d)].size());
    for (int h = 0; h < n; ++h)
      for (int t = 0; t < n; ++t)
        if (h != t) pairs.push_back({d, h, t});
  }
  rng.shuffle(pairs);

  // Zipf over non-NA relations.
  std::vector<double> cdf(static_cast<size_t>(cfg.relations));
  double z = 0.0;
  for (int r = 0; r < cfg.relations; ++r) {
    z += 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent);
    cdf[static_cast<size_t>(r)] = z;
  }
  for (double& c : cdf) c /= z;
  auto sample_relation = [&]() {
    const double u = rng.uniform();
    return static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  std::vector<std::vector<Label>> doc_labels(static_cast<size_t>(cfg.documents));
  for (int64_t i = 0; i < gold_quota; ++i) {
    const PairRef& p = pairs[static_cast<size_t>(i)];
    Label l;
    l.head = p.h;
    l.tail = p.t;
    l.rel = sample_relation();
    doc_labels[static_cast<size_t>(p.doc)].push_back(l);
  }

  Corpus corpus;
  corpus.reserve(static_cast<size_t>(cfg.documents));
  for (int d = 0; d < cfg.documents; ++d) {
    const auto& ents = doc_entities[static_cast<size_t>(d)];
    const int n = static_cast<int>(ents.size());
    std::vector<PlannedSentence> sentences;

    // Entities that never appear in an evidence sentence still need one
    // mention, so they get a short introduction sentence.
    std::vector<bool> covered(static_cast<size_t>(n), false);
    for (const Label& l : doc_labels[static_cast<size_t>(d)]) {
      covered[static_cast<size_t>(l.head)] = true;
      covered[static_cast<size_t>(l.tail)] = true;
    }
    for (int e = 0; e < n; ++e) {
      if (covered[static_cast<size_t>(e)]) continue;
      PlannedSentence s;
      s.words = {filler(), pool[static_cast<size_t>(ents[static_cast<size_t>(e)])], filler()};
      s.mentions.push_back({e, 1});
      sentences.push_back(std::move(s));
    }
    // One evidence sentence per gold triple. The head mention is preceded by
    // the relation's "a" trigger and the tail mention by its "b" trigger, so
    // both the relation and the pair's direction are decodable from text.
    for (size_t li = 0; li < doc_labels[static_cast<size_t>(d)].size(); ++li) {
      const Label& l = doc_labels[static_cast<size_t>(d)][li];
      char trig_a[16], trig_b[16];
      std::snprintf(trig_a, sizeof trig_a, "trg%02da", l.rel);
      std::snprintf(trig_b, sizeof trig_b, "trg%02db", l.rel);
      PlannedSentence s;
      s.words = {trig_a,
                 pool[static_cast<size_t>(ents[static_cast<size_t>(l.head)])],
                 trig_b,
                 pool[static_cast<size_t>(ents[static_cast<size_t>(l.tail)])],
                 filler()};
      s.mentions.push_back({l.head, 1});
      s.mentions.push_back({l.tail, 3});
      s.is_evidence = true;
      s.evidence_head = l.head;
      s.evidence_tail = l.tail;
      s.evidence_rel = l.rel;
      // stated twice with different surroundings, as facts recur in prose
      PlannedSentence restated = s;
      restated.words.back() = filler();
      restated.is_evidence = false;
      sentences.push_back(std::move(s));
      sentences.push_back(std::move(restated));
    }
    // A little unrelated noise.
    {
      PlannedSentence s;
      const int len = 3 + static_cast<int>(rng.below(3));
      for (int w = 0; w < len; ++w) s.words.push_back(filler());
      sentences.push_back(std::move(s));
    }
    rng.shuffle(sentences);

    RawDocument doc;
    doc.title = "synth-" + std::to_string(cfg.seed) + "-" + std::to_string(d);
    doc.entities.assign(static_cast<size_t>(n), {});
    for (int si = 0; si < static_cast<int>(sentences.size()); ++si) {
      PlannedSentence& s = sentences[static_cast<size_t>(si)];
      for (auto [entity, offset] : s.mentions) {
        Mention m;
        m.name = pool[static_cast<size_t>(ents[static_cast<size_t>(entity)])];
        m.sent_id = si;
        m.start = offset;
        m.end = offset + 1;
        m.type = "SYN";
        doc.entities[static_cast<size_t>(entity)].push_back(std::move(m));
      }
      doc.sents.push_back(std::move(s.words));
    }
    for (int si = 0; si < static_cast<int>(sentences.size()); ++si) {
      const PlannedSentence& s = sentences[static_cast<size_t>(si)];
      if (!s.is_evidence) continue;
      for (Label& l : doc_labels[static_cast<size_t>(d)])
        if (l.head == s.evidence_head && l.tail == s.evidence_tail && l.rel == s.evidence_rel &&
            l.evidence.empty())
          l.evidence.push_back(si);
    }
    doc.labels = doc_labels[static_cast<size_t>(d)];
    validate_document(doc, schema);
    corpus.push_back(std::move(doc));
  }

  return {std::move(corpus), std::move(schema)};
}

}  // namespace prism
