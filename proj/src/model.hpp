#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "head.hpp"

namespace prism {

struct ModelConfig {
  EncoderConfig encoder;
  HeadConfig head;
  uint64_t seed = 0;

  void validate() const;
};

// Per-document model output. probs/logits are [pairs x classes] on the tape;
// pair order matches GoldLabels::pairs.
struct DocScores {
  Tensor logits;
  Tensor probs;
  std::vector<std::pair<int, int>> pairs;
};

// Encoder + relation head over one shared parameter store. The relation
// description table is recomputed from the schema on every forward pass and
// participates in the gradient record.
class Model {
 public:
  Model(ModelConfig cfg, Vocabulary vocab, RelationSchema schema);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Vocabulary& relation_vocab() const { return rel_vocab_; }
  const RelationSchema& schema() const { return schema_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  int classes() const { return cfg_.head.model_na ? schema_.size() : schema_.size() - 1; }

  // Relation description embeddings [classes x dim]; requires prism enabled.
  Tensor relation_table(Tape& tape, Rng* dropout_rng = nullptr);

  // Scores for every ordered entity pair of one tokenized document. The
  // relation table handle must come from the same tape (ignored when prism
  // is off; pass {}).
  DocScores score_document(Tape& tape, const RawDocument& doc, const TokenizedDocument& tok,
                           Tensor relation_tbl, Rng* dropout_rng = nullptr);

  void save(const std::string& path, const std::vector<std::string>& train_titles = {}) const;
  static Model load(const std::string& path, std::vector<std::string>* train_titles = nullptr);

 private:
  void build();
  std::vector<std::vector<int>> description_token_ids() const;

  ModelConfig cfg_;
  Vocabulary vocab_;
  Vocabulary rel_vocab_;  // description tokens; separate embedding space
  RelationSchema schema_;
  ParamStore params_;
  EncoderWeights enc_;
  Parameter* tok_emb_ = nullptr;
  Parameter* rel_emb_ = nullptr;
  Parameter *wh_ = nullptr, *bh_ = nullptr, *wt_ = nullptr, *bt_ = nullptr;
  Parameter *bil_w_ = nullptr, *bil_b_ = nullptr;
  Parameter *pair_w_ = nullptr, *pair_b_ = nullptr;
};

// Relation-description vocabulary: reserved tokens plus every description
// word of the schema, in schema order.
Vocabulary build_relation_vocabulary(const RelationSchema& schema);

}  // namespace prism
