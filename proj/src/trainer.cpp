#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prism {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
    throw ConfigError("warmup ratio must be in [0, 1)");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
    throw ConfigError("Adam betas must be in (0, 1)");
  if (eps <= 0.0) throw ConfigError("Adam epsilon must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (max_grad_norm <= 0.0) throw ConfigError("max gradient norm must be positive");
  if (max_tolerance < 1) throw ConfigError("max tolerance must be positive");
  if (epochs < 1) throw ConfigError("epoch count must be positive");
}

AdamW::AdamW(ParamStore& params, const TrainConfig& cfg) : params_(&params), cfg_(cfg) {
  for (const auto& p : params.all()) {
    m_.push_back(Value::zeros(p->value.shape));
    v_.push_back(Value::zeros(p->value.shape));
  }
}

void AdamW::step(double lr_t) {
  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const auto& params = params_->all();
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      const double g = p.grad.data[i];
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in parameter '" + p.name + "'");
      double& m = m_[pi].data[i];
      double& v = v_[pi].data[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      double& w = p.value.data[i];
      w -= lr_t * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w);
    }
    p.zero_grad();
  }
}

double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
  if (step < 0 || step > total_steps) throw ConfigError("lr_at step outside [0, total]");
  if (total_steps == 0) return 0.0;
  const int64_t warmup = static_cast<int64_t>(cfg.warmup_ratio * static_cast<double>(total_steps));
  if (warmup > 0 && step <= warmup)
    return cfg.lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps == warmup) return cfg.lr;
  return cfg.lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

double clip_gradients(ParamStore& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double scale = max_norm / norm;
  for (const auto& p : params.all())
    for (double& g : p->grad.data) g *= scale;
  return scale;
}

std::vector<TokenizedDocument> tokenize_corpus(const Corpus& docs, const Vocabulary& vocab,
                                               int max_chunk) {
  std::vector<TokenizedDocument> out;
  out.reserve(docs.size());
  for (const RawDocument& doc : docs) {
    TokenizedDocument tok = tokenize_with_markers(doc, vocab);
    chunk_document(tok, max_chunk, doc.title);
    out.push_back(std::move(tok));
  }
  return out;
}

Predictions predict(Model& model, const Corpus& docs,
                    const std::vector<TokenizedDocument>& tokenized) {
  Predictions out;
  for (size_t d = 0; d < docs.size(); ++d) {
    const RawDocument& doc = docs[d];
    if (doc.entities.size() < 2) continue;  // no ordered pairs to score
    Tape tape;
    Tensor rel_table;
    if (model.config().head.prism) rel_table = model.relation_table(tape);
    DocScores scores = model.score_document(tape, doc, tokenized[d], rel_table);
    GoldLabels gold = build_gold(doc, model.schema(), model.config().head.model_na);

    DocPredictions dp;
    dp.doc = static_cast<int>(d);
    dp.pairs = scores.pairs;
    dp.classes = model.classes();
    dp.probs = tape.val(scores.probs).data;
    dp.logits = tape.val(scores.logits).data;
    dp.gold.reserve(gold.targets.data.size());
    for (double y : gold.targets.data) dp.gold.push_back(y != 0.0 ? 1 : 0);
    out.push_back(std::move(dp));
  }
  return out;
}

TrainResult train(Model& model, const Corpus& train_docs, const Corpus& dev_docs,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_docs.empty()) throw DataError("training split is empty");
  if (dev_docs.empty()) throw DataError("development split is empty");

  const int max_chunk = model.config().encoder.max_chunk;
  const auto train_tok = tokenize_corpus(train_docs, model.vocab(), max_chunk);
  const auto dev_tok = tokenize_corpus(dev_docs, model.vocab(), max_chunk);

  // Documents without an ordered pair carry no training signal.
  std::vector<int> usable;
  for (size_t d = 0; d < train_docs.size(); ++d)
    if (train_docs[d].entities.size() >= 2) usable.push_back(static_cast<int>(d));
  if (usable.empty()) throw DataError("no training document has two or more entities");

  std::vector<GoldLabels> train_gold(train_docs.size());
  for (int d : usable)
    train_gold[static_cast<size_t>(d)] =
        build_gold(train_docs[static_cast<size_t>(d)], model.schema(),
                   model.config().head.model_na);

  const int64_t steps_per_epoch =
      (static_cast<int64_t>(usable.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = steps_per_epoch * cfg.epochs;

  AdamW optimizer(model.params(), cfg);
  const bool prism = model.config().head.prism;
  const double dropout = model.config().encoder.dropout;

  TrainResult result;
  std::vector<Value> best_params = model.params().snapshot_values();
  EarlyStop stopper;
  stopper.max_tolerance = cfg.max_tolerance;
  int64_t global_step = 0;
  double last_lr = 0.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = usable;
    Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle/" + std::to_string(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int64_t coord_sum = 0;
    for (int64_t step = 0; step < steps_per_epoch; ++step) {
      const size_t lo = static_cast<size_t>(step) * static_cast<size_t>(cfg.batch_size);
      const size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch_size));
      int64_t batch_coords = 0;
      for (size_t bi = lo; bi < hi; ++bi)
        batch_coords += train_gold[static_cast<size_t>(order[bi])].targets.numel();

      for (size_t bi = lo; bi < hi; ++bi) {
        const int d = order[bi];
        const GoldLabels& gold = train_gold[static_cast<size_t>(d)];
        const std::string tag = std::to_string(epoch) + "/" + std::to_string(step) + "/" +
                                std::to_string(d);
        Tape tape;
        Tensor rel_table;
        if (prism) {
          Rng rel_rng = Rng::substream(cfg.seed, "dropout/rel/" + tag);
          rel_table = model.relation_table(tape, dropout > 0.0 ? &rel_rng : nullptr);
        }
        Rng doc_rng = Rng::substream(cfg.seed, "dropout/doc/" + tag);
        DocScores scores =
            model.score_document(tape, train_docs[static_cast<size_t>(d)],
                                 train_tok[static_cast<size_t>(d)], rel_table,
                                 dropout > 0.0 ? &doc_rng : nullptr);
        Tensor loss = tape.bce_sum(scores.probs, gold.targets);
        const double doc_loss = tape.val(loss).scalar();
        if (!std::isfinite(doc_loss)) throw NumericError("non-finite training loss");
        loss_sum += doc_loss;
        // Batch loss is the mean over the batch's pair-relation coordinates.
        tape.backward(loss, 1.0 / static_cast<double>(batch_coords));
      }
      coord_sum += batch_coords;

      clip_gradients(model.params(), cfg.max_grad_norm);
      global_step += 1;
      last_lr = lr_at(global_step, total_steps, cfg);
      optimizer.step(last_lr);
    }

    const Predictions dev_preds = predict(model, dev_docs, dev_tok);
    const auto dev_records = flatten_records(dev_preds, model.schema(), model.config().head.model_na);
    const ThresholdResult dev_best = best_threshold(dev_records);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = coord_sum == 0 ? 0.0 : loss_sum / static_cast<double>(coord_sum);
    rec.dev_f1 = dev_best.f1;
    rec.dev_threshold = dev_best.threshold;
    {
      // precision/recall at the tuned threshold, train overlap ignored here
      int64_t tp = 0, pred = 0, gold_n = 0;
      for (const PredRecord& r : dev_records) {
        const bool predicted = r.prob > dev_best.threshold;
        pred += predicted ? 1 : 0;
        gold_n += r.gold ? 1 : 0;
        tp += (predicted && r.gold) ? 1 : 0;
      }
      rec.dev_precision = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
      rec.dev_recall = gold_n == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_n);
    }
    rec.lr_end = last_lr;

    const bool stop = stopper.observe(epoch, rec.dev_f1, &rec.is_best);
    if (rec.is_best) best_params = model.params().snapshot_values();
    rec.tolerance = stopper.tolerance;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch;
  result.best_f1 = std::max(0.0, stopper.best_f1);

  model.params().restore_values(best_params);
  return result;
}

}  // namespace prism
