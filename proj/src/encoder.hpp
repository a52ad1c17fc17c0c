#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tensor.hpp"
#include "tokenizer.hpp"

namespace prism {

struct EncoderConfig {
  int dim = 32;
  int layers = 2;
  int heads = 4;
  int ff_dim = 64;
  int max_chunk = 512;
  double dropout = 0.1;

  void validate() const;
};

// Handles into the shared transformer body (everything except the token
// embedding tables, which differ between document text and relation
// descriptions while the body and positional embeddings are shared).
struct EncoderWeights {
  Parameter* pos = nullptr;
  struct Layer {
    Parameter *ln1_g, *ln1_b;
    Parameter *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Parameter *ln2_g, *ln2_b;
    Parameter *w1, *b1, *w2, *b2;
  };
  std::vector<Layer> layers;
};

// Creates and initializes the body parameters under `prefix` (e.g. "enc").
EncoderWeights build_encoder(ParamStore& store, const EncoderConfig& cfg, uint64_t seed,
                             const std::string& prefix = "enc");

// Creates and initializes a token embedding table [vocab x dim].
Parameter& build_embedding(ParamStore& store, const std::string& name, int vocab_size, int dim,
                           uint64_t seed);

// Pre-norm transformer pass over one raw token sequence (one chunk).
// Positional embeddings index from 0; the sequence must fit max_chunk.
// `dropout_rng` enables training-mode dropout; pass nullptr for evaluation.
Tensor encode_sequence(Tape& tape, const EncoderConfig& cfg, const EncoderWeights& w,
                       Parameter& tok_emb, std::span<const int> ids, Rng* dropout_rng);

// Chunk-by-chunk encoding with shared parameters; per-token outputs from all
// chunks concatenate to the full-length sequence embedding [len x dim].
Tensor encode_document(Tape& tape, const EncoderConfig& cfg, const EncoderWeights& w,
                       Parameter& tok_emb, const TokenizedDocument& doc, Rng* dropout_rng);

}  // namespace prism
