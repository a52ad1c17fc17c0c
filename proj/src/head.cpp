#include "head.hpp"

#include <set>

namespace prism {

void HeadConfig::validate() const {
  if (hidden < 0) throw ConfigError("head hidden dim must be non-negative");
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
}

GoldLabels build_gold(const RawDocument& doc, const RelationSchema& schema, bool model_na) {
  GoldLabels gold;
  gold.classes = model_na ? schema.size() : schema.size() - 1;
  const int n = static_cast<int>(doc.entities.size());
  for (int h = 0; h < n; ++h)
    for (int t = 0; t < n; ++t)
      if (h != t) gold.pairs.push_back({h, t});
  if (gold.pairs.empty()) {
    gold.targets = Value();
    return gold;
  }
  gold.targets = Value::zeros({static_cast<int>(gold.pairs.size()), gold.classes});
  std::set<std::pair<int, int>> labelled;
  for (const Label& l : doc.labels) labelled.insert({l.head, l.tail});
  for (size_t p = 0; p < gold.pairs.size(); ++p)
    if (model_na && !labelled.count(gold.pairs[p]))
      gold.targets.at(static_cast<int>(p), schema.na_index()) = 1.0;
  for (const Label& l : doc.labels) {
    // pairs are enumerated in (h, t) lexicographic order
    const auto it = std::lower_bound(gold.pairs.begin(), gold.pairs.end(),
                                     std::make_pair(l.head, l.tail));
    const int p = static_cast<int>(it - gold.pairs.begin());
    gold.targets.at(p, l.rel) = 1.0;
  }
  return gold;
}

Tensor pool_entity(Tape& tape, Tensor mention_rows) {
  return tape.logsumexp_rows(mention_rows);
}

Tensor project(Tape& tape, Tensor pooled, Parameter& w, Parameter& b) {
  return tape.tanh(tape.add_row(tape.matmul(pooled, tape.leaf(w)), tape.leaf(b)));
}

Tensor bilinear_score(Tape& tape, Tensor zh, Tensor zt, Parameter& w, Parameter& b) {
  return tape.bilinear(zh, zt, tape.leaf(w), tape.leaf(b));
}

Tensor pair_representation(Tape& tape, Tensor zh, Tensor zt, Parameter& w, Parameter& b) {
  return tape.tanh(tape.add_row(tape.matmul(tape.concat_cols(zh, zt), tape.leaf(w)), tape.leaf(b)));
}

Tensor adaptive_scores(Tape& tape, Tensor pair_repr, Tensor relation_table) {
  return tape.cosine_matrix(pair_repr, relation_table);
}

Tensor combine_logits(Tape& tape, Tensor scores, Tensor adaptive, double lambda) {
  return tape.add(scores, tape.scale(adaptive, lambda));
}

Tensor combine(Tape& tape, Tensor scores, Tensor adaptive, double lambda) {
  return tape.sigmoid(combine_logits(tape, scores, adaptive, lambda));
}

Tensor bce_loss_mean(Tape& tape, Tensor probs, const GoldLabels& gold) {
  const int64_t total = gold.targets.numel();
  if (total == 0) throw DataError("document has no entity pairs to score");
  Tensor sum = tape.bce_sum(probs, gold.targets);
  return tape.scale(sum, 1.0 / static_cast<double>(total));
}

}  // namespace prism
