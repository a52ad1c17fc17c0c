#include "model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace prism {

using nlohmann::json;

void ModelConfig::validate() const {
  encoder.validate();
  head.validate();
}

Vocabulary build_relation_vocabulary(const RelationSchema& schema) {
  Vocabulary v;
  for (const RelationInfo& r : schema.entries()) {
    std::istringstream words(r.description);
    std::string w;
    while (words >> w) v.add(w);
  }
  return v;
}

Model::Model(ModelConfig cfg, Vocabulary vocab, RelationSchema schema)
    : cfg_(cfg), vocab_(std::move(vocab)), schema_(std::move(schema)) {
  cfg_.validate();
  if (cfg_.head.hidden == 0) cfg_.head.hidden = cfg_.encoder.dim;
  if (cfg_.head.prism) rel_vocab_ = build_relation_vocabulary(schema_);
  for (const RelationInfo& r : schema_.entries())
    if (r.description.empty()) throw DataError("relation '" + r.id + "' has no description");
  build();
}

void Model::build() {
  const uint64_t seed = cfg_.seed;
  const int d = cfg_.encoder.dim;
  const int h = cfg_.head.hidden;
  tok_emb_ = &build_embedding(params_, "tok_emb", vocab_.size(), d, seed);
  enc_ = build_encoder(params_, cfg_.encoder, seed, "enc");

  auto normal = [&](const char* name, std::vector<int> shape) -> Parameter* {
    Parameter& p = params_.create(name, std::move(shape));
    Rng rng = Rng::substream(seed, std::string("init/") + name);
    for (double& x : p.value.data) x = rng.normal(0.0, 0.02);
    return &p;
  };
  auto zeros = [&](const char* name, std::vector<int> shape) -> Parameter* {
    return &params_.create(name, std::move(shape));
  };

  wh_ = normal("head.wh", {d, h});
  bh_ = zeros("head.bh", {1, h});
  wt_ = normal("head.wt", {d, h});
  bt_ = zeros("head.bt", {1, h});
  bil_w_ = normal("head.bilinear.w", {classes(), h, h});
  bil_b_ = zeros("head.bilinear.b", {1, classes()});
  if (cfg_.head.prism) {
    rel_emb_ = &build_embedding(params_, "rel_emb", rel_vocab_.size(), d, seed);
    pair_w_ = normal("head.pair.w", {2 * h, d});
    pair_b_ = zeros("head.pair.b", {1, d});
  }
}

std::vector<std::vector<int>> Model::description_token_ids() const {
  std::vector<std::vector<int>> out;
  for (int c = 0; c < classes(); ++c) {
    const RelationInfo& r = schema_.at(c);
    std::vector<int> ids = {Vocabulary::kCls};
    std::istringstream words(r.description);
    std::string w;
    while (words >> w) ids.push_back(rel_vocab_.id(w));
    if (ids.size() == 1) throw DataError("relation '" + r.id + "' has no description");
    if (static_cast<int>(ids.size()) > cfg_.encoder.max_chunk)
      throw DataError("description of relation '" + r.id + "' exceeds the chunk length");
    out.push_back(std::move(ids));
  }
  return out;
}

Tensor Model::relation_table(Tape& tape, Rng* dropout_rng) {
  if (!cfg_.head.prism) throw StateError("relation table requested with the similarity path off");
  const auto descs = description_token_ids();
  std::vector<Tensor> rows;
  rows.reserve(descs.size());
  for (const auto& ids : descs) {
    Tensor enc = encode_sequence(tape, cfg_.encoder, enc_, *rel_emb_, ids, dropout_rng);
    rows.push_back(tape.gather_rows(enc, {0}));  // pooling-token output
  }
  return tape.concat_rows(rows);
}

DocScores Model::score_document(Tape& tape, const RawDocument& doc, const TokenizedDocument& tok,
                                Tensor relation_tbl, Rng* dropout_rng) {
  if (doc.entities.size() < 2)
    throw DataError("document '" + doc.title + "' has fewer than two entities");
  Tensor seq = encode_document(tape, cfg_.encoder, enc_, *tok_emb_, tok, dropout_rng);

  // Entity representations: logsumexp pooling over each entity's opening
  // marker embeddings.
  std::vector<Tensor> pooled;
  pooled.reserve(doc.entities.size());
  for (const auto& mentions : tok.mentions) {
    if (mentions.empty()) throw DataError("document '" + doc.title + "' has an entity without mentions");
    std::vector<int> marker_rows;
    marker_rows.reserve(mentions.size());
    for (const MentionSpan& m : mentions) marker_rows.push_back(m.marker);
    pooled.push_back(pool_entity(tape, tape.gather_rows(seq, marker_rows)));
  }
  Tensor entities = tape.concat_rows(pooled);  // [n x d]

  Tensor zh_all = project(tape, entities, *wh_, *bh_);
  Tensor zt_all = project(tape, entities, *wt_, *bt_);

  DocScores out;
  const int n = static_cast<int>(doc.entities.size());
  std::vector<int> head_idx, tail_idx;
  for (int hi = 0; hi < n; ++hi)
    for (int ti = 0; ti < n; ++ti)
      if (hi != ti) {
        out.pairs.push_back({hi, ti});
        head_idx.push_back(hi);
        tail_idx.push_back(ti);
      }
  Tensor zh = tape.gather_rows(zh_all, head_idx);
  Tensor zt = tape.gather_rows(zt_all, tail_idx);
  Tensor scores = bilinear_score(tape, zh, zt, *bil_w_, *bil_b_);

  if (cfg_.head.prism) {
    Tensor pair = pair_representation(tape, zh, zt, *pair_w_, *pair_b_);
    Tensor adaptive = adaptive_scores(tape, pair, relation_tbl);
    out.logits = combine_logits(tape, scores, adaptive, cfg_.head.lambda);
  } else {
    out.logits = scores;
  }
  out.probs = tape.sigmoid(out.logits);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic + version, a JSON header, then raw little-endian doubles
// for every parameter in store order.

namespace {
constexpr char kMagic[8] = {'P', 'R', 'S', 'M', 'C', 'K', 'P', '1'};

json encoder_to_json(const EncoderConfig& e) {
  return {{"dim", e.dim},      {"layers", e.layers},       {"heads", e.heads},
          {"ff_dim", e.ff_dim}, {"max_chunk", e.max_chunk}, {"dropout", e.dropout}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig e;
  e.dim = j.at("dim").get<int>();
  e.layers = j.at("layers").get<int>();
  e.heads = j.at("heads").get<int>();
  e.ff_dim = j.at("ff_dim").get<int>();
  e.max_chunk = j.at("max_chunk").get<int>();
  e.dropout = j.at("dropout").get<double>();
  return e;
}
}  // namespace

void Model::save(const std::string& path, const std::vector<std::string>& train_titles) const {
  json header;
  header["config"] = {{"encoder", encoder_to_json(cfg_.encoder)},
                      {"head",
                       {{"hidden", cfg_.head.hidden},
                        {"lambda", cfg_.head.lambda},
                        {"prism", cfg_.head.prism},
                        {"model_na", cfg_.head.model_na}}},
                      {"seed", cfg_.seed}};
  header["vocab"] = vocab_.lines();
  header["vocab_hash"] = vocab_.hash();
  header["rel_vocab"] = rel_vocab_.lines();
  json schema = json::array();
  for (const RelationInfo& r : schema_.entries())
    schema.push_back({{"id", r.id}, {"name", r.name}, {"description", r.description}});
  header["schema"] = std::move(schema);
  header["train_titles"] = train_titles;
  json plist = json::array();
  for (const auto& p : params_.all()) plist.push_back({{"name", p->name}, {"shape", p->value.shape}});
  header["params"] = std::move(plist);

  const std::string head_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  const uint64_t len = head_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(head_str.data(), static_cast<std::streamsize>(len));
  for (const auto& p : params_.all())
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
}

Model Model::load(const std::string& path, std::vector<std::string>* train_titles) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError("not a checkpoint file (or unsupported version): " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string head_str(len, '\0');
  in.read(head_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header: " + path);
  json header = json::parse(head_str);

  ModelConfig cfg;
  cfg.encoder = encoder_from_json(header.at("config").at("encoder"));
  const json& hj = header.at("config").at("head");
  cfg.head.hidden = hj.at("hidden").get<int>();
  cfg.head.lambda = hj.at("lambda").get<double>();
  cfg.head.prism = hj.at("prism").get<bool>();
  cfg.head.model_na = hj.at("model_na").get<bool>();
  cfg.seed = header.at("config").at("seed").get<uint64_t>();

  Vocabulary vocab = Vocabulary::from_lines(header.at("vocab").get<std::vector<std::string>>());
  std::vector<RelationInfo> rels;
  for (const auto& rj : header.at("schema"))
    rels.push_back({rj.at("id").get<std::string>(), rj.at("name").get<std::string>(),
                    rj.at("description").get<std::string>()});
  Model model(cfg, std::move(vocab), RelationSchema::from_entries(std::move(rels)));

  if (header.at("vocab_hash").get<uint64_t>() != model.vocab_.hash())
    throw DataError("checkpoint vocabulary hash mismatch: " + path);
  for (const auto& pj : header.at("params")) {
    Parameter* p = model.params_.find(pj.at("name").get<std::string>());
    if (!p || p->value.shape != pj.at("shape").get<std::vector<int>>())
      throw DataError("checkpoint parameter layout mismatch at '" +
                      pj.at("name").get<std::string>() + "'");
  }
  if (header.at("params").size() != model.params_.size())
    throw DataError("checkpoint parameter count mismatch");
  for (const auto& p : model.params_.all()) {
    in.read(reinterpret_cast<char*>(p->value.data.data()),
            static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint tensor data: " + path);
  }
  if (train_titles)
    *train_titles = header.at("train_titles").get<std::vector<std::string>>();
  return model;
}

}  // namespace prism
