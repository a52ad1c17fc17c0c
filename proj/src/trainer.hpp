#pragma once

#include <functional>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "model.hpp"

namespace prism {

struct TrainConfig {
  int batch_size = 4;
  double lr = 3e-5;  // the toy synthetic configs scale this up
  double warmup_ratio = 0.06;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double max_grad_norm = 1.0;
  int max_tolerance = 5;
  int epochs = 30;
  uint64_t seed = 0;

  void validate() const;
};

// Decoupled-weight-decay Adam with bias correction; gradients are consumed
// (reset) by step(). Aborts on a non-finite gradient, naming the parameter.
class AdamW {
 public:
  AdamW(ParamStore& params, const TrainConfig& cfg);
  void step(double lr_t);
  int64_t steps() const { return step_; }

 private:
  ParamStore* params_;
  TrainConfig cfg_;
  std::vector<Value> m_, v_;
  int64_t step_ = 0;
};

// Linear warmup (first warmup_ratio fraction of steps) then linear decay to
// zero at total_steps.
double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg);

// Scales all gradients by max_norm / norm when the global L2 norm exceeds
// max_norm; returns the applied scale.
double clip_gradients(ParamStore& params, double max_norm);

// Tolerance-based early stopping. The counter increments when a dev F1 comes
// in worse than the previous evaluation, resets on any improvement and is
// left unchanged on an exact tie; the best checkpoint tracks the maximum F1
// over all evaluations.
struct EarlyStop {
  int max_tolerance = 5;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int tolerance = 0;

  // Returns true when training should stop. is_best flags a new checkpoint.
  bool observe(int epoch, double f1, bool* is_best) {
    *is_best = f1 > best_f1;
    if (*is_best) {
      best_f1 = f1;
      best_epoch = epoch;
    }
    if (prev_f1_ >= 0.0) {
      if (f1 < prev_f1_)
        tolerance += 1;
      else if (f1 > prev_f1_)
        tolerance = 0;
    }
    prev_f1_ = f1;
    return tolerance >= max_tolerance;
  }

 private:
  double prev_f1_ = -1.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  double dev_precision = 0.0;
  double dev_recall = 0.0;
  double dev_threshold = 0.0;
  double lr_end = 0.0;
  int tolerance = 0;
  bool is_best = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;    // 1-based; 0 when no epoch ran
  double best_f1 = 0.0;
  bool stopped_early = false;
};

// Produces the dense per-document predictions of `model` on `docs`
// (evaluation mode, no dropout).
Predictions predict(Model& model, const Corpus& docs,
                    const std::vector<TokenizedDocument>& tokenized);

std::vector<TokenizedDocument> tokenize_corpus(const Corpus& docs, const Vocabulary& vocab,
                                               int max_chunk);

// Mini-batch training with per-epoch dev evaluation and tolerance-based early
// stopping; the model is left at the best-dev-F1 checkpoint. The tolerance
// counter increments when dev F1 is worse than the previous evaluation and
// resets on any improvement.
TrainResult train(Model& model, const Corpus& train_docs, const Corpus& dev_docs,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace prism
