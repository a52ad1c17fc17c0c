#pragma once

#include <utility>
#include <vector>

#include "corpus.hpp"
#include "tensor.hpp"

namespace prism {

struct HeadConfig {
  int hidden = 0;        // dim of z_h / z_t; 0 means "use the encoder dim"
  double lambda = 10.0;  // scale factor on the adaptive score
  bool prism = true;     // similarity path enabled
  bool model_na = true;  // NA as an ordinary class with its own score row

  void validate() const;
};

// Binary targets for every ordered entity pair (h != t) of one document.
// For a pair with no gold relation exactly the NA coordinate is 1 (when NA is
// modelled); pairs with gold relations have those coordinates 1 and NA 0.
struct GoldLabels {
  std::vector<std::pair<int, int>> pairs;  // (head, tail) entity indices
  int classes = 0;                         // columns; schema size, minus NA when unmodelled
  Value targets;                           // [pairs x classes]
};

GoldLabels build_gold(const RawDocument& doc, const RelationSchema& schema, bool model_na);

// Entity representation: logsumexp pooling over the mention rows [k x d].
Tensor pool_entity(Tape& tape, Tensor mention_rows);

// Role-specific affine map + tanh; head and tail use distinct parameters.
Tensor project(Tape& tape, Tensor pooled, Parameter& w, Parameter& b);

// s[p][r] = zh_p^T W_r zt_p + b_r over every class including NA.
Tensor bilinear_score(Tape& tape, Tensor zh, Tensor zt, Parameter& w, Parameter& b);

// z_(h,t) = tanh(W [z_h ; z_t] + b), batched over pairs.
Tensor pair_representation(Tape& tape, Tensor zh, Tensor zt, Parameter& w, Parameter& b);

// s'[p][r] = cosine(z_(h,t) row p, relation embedding r), each in [-1, 1].
Tensor adaptive_scores(Tape& tape, Tensor pair_repr, Tensor relation_table);

// Combined pre-sigmoid logits s + lambda * s'.
Tensor combine_logits(Tape& tape, Tensor scores, Tensor adaptive, double lambda);

// P = sigmoid(s + lambda * s'); with lambda = 0 this reduces exactly to the
// similarity-free head.
Tensor combine(Tape& tape, Tensor scores, Tensor adaptive, double lambda);

// Mean binary cross-entropy over all pair-relation coordinates.
Tensor bce_loss_mean(Tape& tape, Tensor probs, const GoldLabels& gold);

}  // namespace prism
