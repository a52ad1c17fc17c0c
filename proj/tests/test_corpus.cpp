#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "corpus.hpp"
#include "tokenizer.hpp"

using namespace prism;

namespace {

std::string fixture(const std::string& name) {
  return std::string(PRISM_FIXTURE_DIR) + "/" + name;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool docs_equal(const RawDocument& a, const RawDocument& b) {
  if (a.title != b.title || a.sents != b.sents) return false;
  if (a.entities.size() != b.entities.size() || a.labels.size() != b.labels.size()) return false;
  for (size_t e = 0; e < a.entities.size(); ++e) {
    if (a.entities[e].size() != b.entities[e].size()) return false;
    for (size_t m = 0; m < a.entities[e].size(); ++m) {
      const Mention &x = a.entities[e][m], &y = b.entities[e][m];
      if (x.name != y.name || x.sent_id != y.sent_id || x.start != y.start || x.end != y.end ||
          x.type != y.type)
        return false;
    }
  }
  for (size_t l = 0; l < a.labels.size(); ++l) {
    const Label &x = a.labels[l], &y = b.labels[l];
    if (x.head != y.head || x.tail != y.tail || x.rel != y.rel || x.evidence != y.evidence)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("schema load appends NA exactly once and keeps order") {
  const RelationSchema schema = RelationSchema::load(fixture("mini_schema.json"));
  CHECK(schema.size() == 6);  // 5 relations + NA
  CHECK(schema.at(schema.na_index()).id == "NA");
  CHECK(schema.index_of("P17") >= 0);
  CHECK(schema.index_of("bogus") == -1);

  // idempotence: a file that already contains NA is not duplicated
  const std::string path = temp_path("schema_with_na.json");
  schema.save(path);
  const RelationSchema again = RelationSchema::load(path);
  CHECK(again.size() == schema.size());

  // the Wikidata-style description round-trips exactly
  const int country = schema.index_of("P17");
  CHECK(schema.at(country).name == "country");
  CHECK(schema.at(country).description ==
        "sovereign state of this item; don't use on humans");
  CHECK(again.at(again.index_of("P17")).description == schema.at(country).description);
}

TEST_CASE("schema rejects duplicates and missing descriptions") {
  CHECK_THROWS_AS(RelationSchema::from_entries(
                      {{"P17", "country", "d"}, {"P17", "country", "d"}}),
                  DataError);
  CHECK_THROWS_AS(RelationSchema::from_entries({{"P17", "country", ""}}), DataError);
}

TEST_CASE("corpus loads, validates and round-trips") {
  const RelationSchema schema = RelationSchema::load(fixture("mini_schema.json"));
  const Corpus corpus = load_corpus(fixture("mini_train.json"), schema);
  CHECK(corpus.size() == 3);
  CHECK(corpus[0].entities.size() >= 2);

  const std::string path = temp_path("corpus_roundtrip.json");
  save_corpus(path, corpus, schema);
  const Corpus again = load_corpus(path, schema);
  REQUIRE(again.size() == corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) CHECK(docs_equal(corpus[i], again[i]));
}

TEST_CASE("empty corpus file gives empty corpus and zero stats") {
  const RelationSchema schema = RelationSchema::load(fixture("mini_schema.json"));
  const std::string path = temp_path("empty_corpus.json");
  std::ofstream(path) << "[]";
  const Corpus corpus = load_corpus(path, schema);
  CHECK(corpus.empty());
  const CorpusStats s = compute_stats(corpus, schema);
  CHECK(s.documents == 0);
  CHECK(s.total_pairs == 0);
  CHECK(s.total_triples == 0);
}

TEST_CASE("malformed records are rejected with the document named") {
  const RelationSchema schema = RelationSchema::load(fixture("mini_schema.json"));
  const std::string path = temp_path("bad_corpus.json");

  // mention span beyond its sentence
  std::ofstream(path) << R"([{"title":"broken-doc","sents":[["a","b"]],
    "vertexSet":[[{"name":"a","sent_id":0,"pos":[0,9],"type":"X"}],
                 [{"name":"b","sent_id":0,"pos":[1,2],"type":"X"}]],
    "labels":[]}])";
  CHECK_THROWS_WITH_AS(load_corpus(path, schema), doctest::Contains("broken-doc"), DataError);

  // unknown relation id
  std::ofstream(path) << R"([{"title":"bad-rel","sents":[["a","b"]],
    "vertexSet":[[{"name":"a","sent_id":0,"pos":[0,1],"type":"X"}],
                 [{"name":"b","sent_id":0,"pos":[1,2],"type":"X"}]],
    "labels":[{"h":0,"t":1,"r":"P9999","evidence":[]}]}])";
  CHECK_THROWS_WITH_AS(load_corpus(path, schema), doctest::Contains("P9999"), DataError);

  // head equals tail
  std::ofstream(path) << R"([{"title":"self-loop","sents":[["a","b"]],
    "vertexSet":[[{"name":"a","sent_id":0,"pos":[0,1],"type":"X"}],
                 [{"name":"b","sent_id":0,"pos":[1,2],"type":"X"}]],
    "labels":[{"h":1,"t":1,"r":"P17","evidence":[]}]}])";
  CHECK_THROWS_AS(load_corpus(path, schema), DataError);

  // entity without mentions
  std::ofstream(path) << R"([{"title":"no-mention","sents":[["a"]],
    "vertexSet":[[]],"labels":[]}])";
  CHECK_THROWS_WITH_AS(load_corpus(path, schema), doctest::Contains("no-mention"), DataError);
}

TEST_CASE("stats: hand-counted NA ratio") {
  // one doc, 2 entities, 1 gold triple -> two ordered pairs, one labelled
  const RelationSchema schema =
      RelationSchema::from_entries({{"R0", "r0", "zero"}, {"R1", "r1", "one"}});
  RawDocument doc;
  doc.title = "hand";
  doc.sents = {{"x", "y"}};
  doc.entities = {{{"x", 0, 0, 1, "T"}}, {{"y", 0, 1, 2, "T"}}};
  doc.labels = {{0, 1, 0, {}}};
  const CorpusStats s = compute_stats({doc}, schema);
  CHECK(s.total_pairs == 2);
  CHECK(s.na_pairs == 1);
  CHECK(s.na_ratio == 0.5);
  CHECK(s.total_triples == 1);
  CHECK(s.triples_per_relation[0] == 1);
}

TEST_CASE("subsample: full-size request is exact, accepted subsets verify") {
  const SyntheticConfig cfg{.documents = 60, .vocabulary = 50, .relations = 6,
                            .zipf_exponent = 1.2, .na_ratio = 0.9, .mean_entities = 3.0,
                            .seed = 4};
  const SyntheticData data = generate_synthetic(cfg);

  const SubsampleResult full = subsample(data.corpus, data.schema, 60, 0);
  CHECK(full.distance == 0.0);
  CHECK(full.indices.size() == 60);

  const SubsampleResult sub = subsample(data.corpus, data.schema, 20, 1, 0.35);
  CHECK(sub.indices.size() == 20);
  // recount oracle: recompute the L1 distance from scratch
  auto dist_of = [&](const Corpus& c) {
    std::vector<double> f(static_cast<size_t>(data.schema.size() - 1), 0.0);
    double tot = 0;
    for (const auto& d : c)
      for (const auto& l : d.labels) {
        f[static_cast<size_t>(l.rel)] += 1;
        ++tot;
      }
    for (auto& x : f) x /= tot;
    return f;
  };
  const auto pf = dist_of(data.corpus);
  const auto ps = dist_of(take(data.corpus, sub.indices));
  double l1 = 0;
  for (size_t i = 0; i < pf.size(); ++i) l1 += std::abs(pf[i] - ps[i]);
  CHECK(l1 == doctest::Approx(sub.distance).epsilon(1e-12));
  CHECK(l1 <= 0.35);

  CHECK_THROWS_AS(subsample(data.corpus, data.schema, 2, 0, 1e-9, 5), DataError);
}

TEST_CASE("synthetic generator: determinism, NA ratio, Zipf head share") {
  const SyntheticConfig cfg{.documents = 120, .vocabulary = 80, .relations = 12,
                            .zipf_exponent = 1.2, .na_ratio = 0.95, .mean_entities = 4.0,
                            .seed = 9};
  const SyntheticData a = generate_synthetic(cfg);
  const SyntheticData b = generate_synthetic(cfg);

  // byte-identical regeneration (via serialized form)
  const std::string pa = temp_path("synth_a.json"), pb = temp_path("synth_b.json");
  save_corpus(pa, a.corpus, a.schema);
  save_corpus(pb, b.corpus, b.schema);
  std::ifstream fa(pa), fb(pb);
  const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);

  const CorpusStats s = compute_stats(a.corpus, a.schema);
  CHECK(s.na_ratio >= 0.93);
  CHECK(s.na_ratio <= 0.97);
  CHECK(s.relation_types == 13);

  // Zipf: the most frequent relation's share tracks 1/H(s) within noise
  double hs = 0.0;
  for (int r = 1; r <= 12; ++r) hs += 1.0 / std::pow(r, 1.2);
  const double expected_head = 1.0 / hs;
  const double head_share = static_cast<double>(s.triples_per_relation[0]) /
                            static_cast<double>(s.total_triples);
  CHECK(head_share == doctest::Approx(expected_head).epsilon(0.35));

  // every entity has at least one mention; labels kept within schema
  for (const RawDocument& d : a.corpus) {
    for (const auto& ms : d.entities) CHECK(!ms.empty());
    for (const Label& l : d.labels) CHECK(l.rel < a.schema.size() - 1);
  }

  CHECK_THROWS_AS(generate_synthetic({.documents = 10, .vocabulary = 50, .relations = 1,
                                      .zipf_exponent = 1.0, .na_ratio = 0.5,
                                      .mean_entities = 3.0, .seed = 0}),
                  ConfigError);
  CHECK_THROWS_AS(generate_synthetic({.documents = 10, .vocabulary = 50, .relations = 4,
                                      .zipf_exponent = 1.0, .na_ratio = 0.999999,
                                      .mean_entities = 2.0, .seed = 0}),
                  ConfigError);
}

TEST_CASE("tokenize_with_markers: single mention and counting oracle") {
  Vocabulary vocab;
  RawDocument doc;
  doc.title = "t";
  doc.sents = {{"A", "B"}};
  doc.entities = {{{"A", 0, 0, 1, "T"}}};
  for (const auto& s : doc.sents)
    for (const auto& w : s) vocab.add(w);

  const TokenizedDocument tok = tokenize_with_markers(doc, vocab);
  REQUIRE(tok.ids.size() == 4);  // * A * B
  CHECK(tok.ids[0] == Vocabulary::kMarker);
  CHECK(tok.ids[2] == Vocabulary::kMarker);
  CHECK(tok.mentions[0][0].marker == 0);
  CHECK(tok.mentions[0][0].begin == 1);
  CHECK(tok.mentions[0][0].end == 2);

  // two entities, no shared words: four markers in document order
  RawDocument two;
  two.title = "t2";
  two.sents = {{"A", "B", "C", "D"}};
  two.entities = {{{"A", 0, 0, 1, "T"}}, {{"CD", 0, 2, 4, "T"}}};
  const TokenizedDocument tok2 = tokenize_with_markers(two, vocab);
  int markers = 0;
  for (int id : tok2.ids) markers += id == Vocabulary::kMarker ? 1 : 0;
  CHECK(markers == 4);
  CHECK(tok2.mentions[0][0].marker < tok2.mentions[1][0].marker);

  // marker count oracle over a full synthetic corpus: 2 x mention count
  const SyntheticData data = generate_synthetic({.documents = 20, .vocabulary = 40,
                                                 .relations = 5, .zipf_exponent = 1.0,
                                                 .na_ratio = 0.9, .mean_entities = 3.0,
                                                 .seed = 2});
  Vocabulary sv = build_vocabulary(data.corpus);
  for (const RawDocument& d : data.corpus) {
    size_t mention_count = 0;
    for (const auto& ms : d.entities) mention_count += ms.size();
    const TokenizedDocument td = tokenize_with_markers(d, sv);
    size_t marker_count = 0;
    for (int id : td.ids) marker_count += id == Vocabulary::kMarker ? 1 : 0;
    CHECK(marker_count == 2 * mention_count);
  }
}

TEST_CASE("marker integrity: detokenize strips markers and reproduces text") {
  const SyntheticData data = generate_synthetic({.documents = 8, .vocabulary = 30,
                                                 .relations = 4, .zipf_exponent = 1.0,
                                                 .na_ratio = 0.9, .mean_entities = 3.0,
                                                 .seed = 5});
  const Vocabulary vocab = build_vocabulary(data.corpus);
  for (const RawDocument& doc : data.corpus) {
    const TokenizedDocument tok = tokenize_with_markers(doc, vocab);
    std::vector<std::string> flat;
    for (const auto& s : doc.sents) flat.insert(flat.end(), s.begin(), s.end());
    CHECK(detokenize(tok.ids, vocab) == flat);
  }
}

TEST_CASE("corpus '*' tokens are escaped away from the marker id") {
  Vocabulary vocab;
  const int starish = vocab.add("*");
  CHECK(starish != Vocabulary::kMarker);
  CHECK(vocab.token(starish) == "\\*");
  CHECK(vocab.id("*") == starish);
  CHECK(Vocabulary::unescape(vocab.token(starish)) == "*");
}

TEST_CASE("chunking: trivial, aligned split, and boundary shift") {
  Vocabulary vocab;
  auto make_doc = [&](int words, int mention_start, int mention_words) {
    RawDocument d;
    d.title = "chunk";
    std::vector<std::string> sent;
    for (int i = 0; i < words; ++i) sent.push_back("w" + std::to_string(i % 7));
    d.sents = {sent};
    d.entities = {{{"m", 0, mention_start, mention_start + mention_words, "T"}},
                  {{"z", 0, 0, 1, "T"}}};
    for (const auto& w : sent) vocab.add(w);
    return d;
  };

  // length 300 with L = 512: one chunk
  {
    RawDocument d = make_doc(296, 10, 1);  // 296 words + 4 markers = 300 tokens
    TokenizedDocument tok = tokenize_with_markers(d, vocab);
    REQUIRE(tok.ids.size() == 300);
    chunk_document(tok, 512, d.title);
    CHECK(tok.chunks == std::vector<std::pair<int, int>>{{0, 300}});
  }
  // length 1024 with nothing at the boundary: [0,512) [512,1024)
  {
    RawDocument d = make_doc(1020, 10, 1);
    TokenizedDocument tok = tokenize_with_markers(d, vocab);
    REQUIRE(tok.ids.size() == 1024);
    chunk_document(tok, 512, d.title);
    CHECK(tok.chunks == std::vector<std::pair<int, int>>{{0, 512}, {512, 1024}});
  }
  // marked mention spanning [510, 515): the 512 cut shifts left to 510
  {
    RawDocument d = make_doc(1021, 508, 3);  // earlier entity shifts this mention's markers to 510/514
    TokenizedDocument tok = tokenize_with_markers(d, vocab);
    REQUIRE(tok.ids.size() == 1025);
    // the second entity's marker sits at 0; first mention occupies [510, 514]
    const MentionSpan span = tok.mentions[0][0];
    REQUIRE(span.marker == 510);
    REQUIRE(span.end == 514);
    chunk_document(tok, 512, d.title);
    REQUIRE(tok.chunks.size() >= 2);
    CHECK(tok.chunks[0] == std::pair<int, int>{0, 510});
    // chunks stay disjoint, ordered, covering
    int expect = 0;
    for (auto [lo, hi] : tok.chunks) {
      CHECK(lo == expect);
      CHECK(hi - lo <= 512);
      expect = hi;
    }
    CHECK(expect == 1025);
    // every mention inside exactly one chunk
    for (const auto& per_entity : tok.mentions)
      for (const MentionSpan& m : per_entity) {
        int containing = 0;
        for (auto [lo, hi] : tok.chunks)
          if (m.marker >= lo && m.end < hi) ++containing;
        CHECK(containing == 1);
      }
  }
  // a marked mention longer than the chunk length is unsupported
  {
    RawDocument d = make_doc(40, 2, 30);
    TokenizedDocument tok = tokenize_with_markers(d, vocab);
    CHECK_THROWS_AS(chunk_document(tok, 16, d.title), DataError);
  }
}
