#include "encoder.hpp"

#include <cmath>

namespace prism {

void EncoderConfig::validate() const {
  if (dim < 1) throw ConfigError("encoder dim must be positive");
  if (layers < 0) throw ConfigError("encoder layer count must be non-negative");
  if (heads < 1 || dim % heads != 0)
    throw ConfigError("encoder dim " + std::to_string(dim) + " must be divisible by head count " +
                      std::to_string(heads));
  if (ff_dim < 1) throw ConfigError("feed-forward dim must be positive");
  if (max_chunk < 8) throw ConfigError("chunk length must be at least 8");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

namespace {

// All weights draw from a sub-stream keyed by parameter name, so adding or
// removing unrelated parameters never perturbs an existing one.
Parameter& init_normal(ParamStore& store, const std::string& name, std::vector<int> shape,
                       uint64_t seed, double sd = 0.02) {
  Parameter& p = store.create(name, std::move(shape));
  Rng rng = Rng::substream(seed, "init/" + name);
  for (double& x : p.value.data) x = rng.normal(0.0, sd);
  return p;
}

Parameter& init_const(ParamStore& store, const std::string& name, std::vector<int> shape,
                      double v) {
  Parameter& p = store.create(name, std::move(shape));
  std::fill(p.value.data.begin(), p.value.data.end(), v);
  return p;
}

}  // namespace

Parameter& build_embedding(ParamStore& store, const std::string& name, int vocab_size, int dim,
                           uint64_t seed) {
  return init_normal(store, name, {vocab_size, dim}, seed);
}

EncoderWeights build_encoder(ParamStore& store, const EncoderConfig& cfg, uint64_t seed,
                             const std::string& prefix) {
  cfg.validate();
  EncoderWeights w;
  w.pos = &init_normal(store, prefix + ".pos", {cfg.max_chunk, cfg.dim}, seed);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l) + ".";
    EncoderWeights::Layer layer;
    layer.ln1_g = &init_const(store, p + "ln1.gain", {1, cfg.dim}, 1.0);
    layer.ln1_b = &init_const(store, p + "ln1.bias", {1, cfg.dim}, 0.0);
    layer.wq = &init_normal(store, p + "attn.wq", {cfg.dim, cfg.dim}, seed);
    layer.bq = &init_const(store, p + "attn.bq", {1, cfg.dim}, 0.0);
    layer.wk = &init_normal(store, p + "attn.wk", {cfg.dim, cfg.dim}, seed);
    layer.bk = &init_const(store, p + "attn.bk", {1, cfg.dim}, 0.0);
    layer.wv = &init_normal(store, p + "attn.wv", {cfg.dim, cfg.dim}, seed);
    layer.bv = &init_const(store, p + "attn.bv", {1, cfg.dim}, 0.0);
    layer.wo = &init_normal(store, p + "attn.wo", {cfg.dim, cfg.dim}, seed);
    layer.bo = &init_const(store, p + "attn.bo", {1, cfg.dim}, 0.0);
    layer.ln2_g = &init_const(store, p + "ln2.gain", {1, cfg.dim}, 1.0);
    layer.ln2_b = &init_const(store, p + "ln2.bias", {1, cfg.dim}, 0.0);
    layer.w1 = &init_normal(store, p + "ff.w1", {cfg.dim, cfg.ff_dim}, seed);
    layer.b1 = &init_const(store, p + "ff.b1", {1, cfg.ff_dim}, 0.0);
    layer.w2 = &init_normal(store, p + "ff.w2", {cfg.ff_dim, cfg.dim}, seed);
    layer.b2 = &init_const(store, p + "ff.b2", {1, cfg.dim}, 0.0);
    w.layers.push_back(layer);
  }
  return w;
}

namespace {

Tensor linear(Tape& t, Tensor x, Parameter& w, Parameter& b) {
  return t.add_row(t.matmul(x, t.leaf(w)), t.leaf(b));
}

Tensor attention(Tape& t, const EncoderConfig& cfg, const EncoderWeights::Layer& layer, Tensor x,
                 Rng* dropout_rng) {
  const int dh = cfg.dim / cfg.heads;
  Tensor q = linear(t, x, *layer.wq, *layer.bq);
  Tensor k = linear(t, x, *layer.wk, *layer.bk);
  Tensor v = linear(t, x, *layer.wv, *layer.bv);
  Tensor merged;
  for (int h = 0; h < cfg.heads; ++h) {
    Tensor qh = t.slice_cols(q, h * dh, dh);
    Tensor kh = t.slice_cols(k, h * dh, dh);
    Tensor vh = t.slice_cols(v, h * dh, dh);
    Tensor scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = t.softmax_rows(scores);
    if (dropout_rng) attn = t.dropout(attn, cfg.dropout, *dropout_rng);
    Tensor ctx = t.matmul(attn, vh);
    merged = h == 0 ? ctx : t.concat_cols(merged, ctx);
  }
  Tensor out = linear(t, merged, *layer.wo, *layer.bo);
  if (dropout_rng) out = t.dropout(out, cfg.dropout, *dropout_rng);
  return out;
}

}  // namespace

Tensor encode_sequence(Tape& tape, const EncoderConfig& cfg, const EncoderWeights& w,
                       Parameter& tok_emb, std::span<const int> ids, Rng* dropout_rng) {
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw DataError("cannot encode an empty token sequence");
  if (n > cfg.max_chunk)
    throw DataError("sequence of length " + std::to_string(n) + " exceeds chunk length " +
                    std::to_string(cfg.max_chunk));
  std::vector<int> tok_idx(ids.begin(), ids.end());
  std::vector<int> pos_idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pos_idx[static_cast<size_t>(i)] = i;

  Tensor x = tape.add(tape.gather_rows(tape.leaf(tok_emb), tok_idx),
                      tape.gather_rows(tape.leaf(*w.pos), pos_idx));
  if (dropout_rng && cfg.dropout > 0.0) x = tape.dropout(x, cfg.dropout, *dropout_rng);

  Rng* drop = (dropout_rng && cfg.dropout > 0.0) ? dropout_rng : nullptr;
  for (const auto& layer : w.layers) {
    Tensor attn_in = tape.layer_norm_rows(x, tape.leaf(*layer.ln1_g), tape.leaf(*layer.ln1_b));
    x = tape.add(x, attention(tape, cfg, layer, attn_in, drop));
    Tensor ff_in = tape.layer_norm_rows(x, tape.leaf(*layer.ln2_g), tape.leaf(*layer.ln2_b));
    Tensor hidden = tape.tanh(linear(tape, ff_in, *layer.w1, *layer.b1));
    Tensor ff_out = linear(tape, hidden, *layer.w2, *layer.b2);
    if (drop) ff_out = tape.dropout(ff_out, cfg.dropout, *drop);
    x = tape.add(x, ff_out);
  }
  return x;
}

Tensor encode_document(Tape& tape, const EncoderConfig& cfg, const EncoderWeights& w,
                       Parameter& tok_emb, const TokenizedDocument& doc, Rng* dropout_rng) {
  if (doc.chunks.empty())
    throw StateError("document has no chunk boundaries; call chunk_document first");
  std::vector<Tensor> parts;
  parts.reserve(doc.chunks.size());
  for (const auto& [lo, hi] : doc.chunks) {
    std::span<const int> ids(doc.ids.data() + lo, static_cast<size_t>(hi - lo));
    parts.push_back(encode_sequence(tape, cfg, w, tok_emb, ids, dropout_rng));
  }
  return parts.size() == 1 ? parts[0] : tape.concat_rows(parts);
}

}  // namespace prism
