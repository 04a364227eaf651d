#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ppn/checkpoint.hpp"
#include "ppn/corpus.hpp"
#include "ppn/eval.hpp"
#include "ppn/model.hpp"

namespace ppn {

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 30;
  int max_steps = 0;  // when > 0, replaces epochs as the step budget
  int batch_size = 8;
  double warmup_ratio = 0.1;
  int eval_every_steps = 100;
  std::uint64_t seed = 13;
  double delta = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int dev_size = 32;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(warmup_ratio >= 0 && warmup_ratio <= 1)) throw ConfigError("warmup_ratio must lie in [0, 1]");
    if (epochs < 1 && max_steps < 1) throw ConfigError("need epochs >= 1 or max_steps >= 1");
    if (batch_size < 1 || eval_every_steps < 1 || dev_size < 1)
      throw ConfigError("batch_size, eval_every_steps and dev_size must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0))
      throw ConfigError("optimizer moments must lie in [0, 1) and eps > 0");
    if (!(clip_norm > 0) || weight_decay < 0) throw ConfigError("clip_norm must be > 0 and weight_decay >= 0");
  }

  Json to_json() const {
    return Json{{"learning_rate", learning_rate}, {"epochs", epochs},
                {"max_steps", max_steps},         {"batch_size", batch_size},
                {"warmup_ratio", warmup_ratio},   {"eval_every_steps", eval_every_steps},
                {"seed", seed},                   {"delta", delta},
                {"beta1", beta1},                 {"beta2", beta2},
                {"adam_eps", adam_eps},           {"weight_decay", weight_decay},
                {"clip_norm", clip_norm},         {"dev_size", dev_size}};
  }
};

/// Linear warmup to the peak at step ceil(ratio * total), then linear decay to
/// zero at `total`. Steps count from 1.
inline double learning_rate_at(int step, int total, double peak, double warmup_ratio) {
  const int warm = static_cast<int>(std::ceil(warmup_ratio * total));
  if (warm > 0 && step <= warm) return peak * step / warm;
  if (total <= warm) return peak;
  return peak * std::max(0, total - step) / static_cast<double>(total - warm);
}

/// Windows of every document with their gold tensors and masks.
inline std::vector<PreparedSample> make_examples(const std::vector<Document>& docs, const SchemaSet& schemas,
                                                 const Vocab& vocab, const ModelConfig& c) {
  std::vector<PreparedSample> out;
  for (const auto& d : docs) {
    const auto qs = build_question_set(d, schemas);
    for (auto& s : assemble_input(qs, d, vocab, c.serialize_options())) {
      auto ps = prepare(std::move(s), c);
      ps.gold = build_link_matrix(ps.sample, d, qs, c.n_link_types());
      out.push_back(std::move(ps));
    }
  }
  return out;
}

/// Seeded subset of the training documents used for checkpoint selection.
inline std::vector<Document> dev_slice(const std::vector<Document>& train_docs, int size, std::uint64_t seed) {
  std::vector<std::size_t> idx(train_docs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed ^ 0xde5u);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(size)));
  std::sort(idx.begin(), idx.end());
  std::vector<Document> out;
  for (auto i : idx) out.push_back(train_docs[i]);
  return out;
}

struct TrainResult {
  Checkpoint best;  // highest dev F1; earliest on ties
  double best_dev_f1 = -1.0;
  int best_step = 0;
  int total_steps = 0;
  std::vector<Json> log;
};

/// Decoupled weight decay applies to matrices only, not to biases, norm
/// parameters or embedding tables.
inline bool decays(const Tensor<float>& t) {
  return t.shape.size() == 2 && t.name.rfind("embed.", 0) != 0;
}

/// Trains on `train_docs` from a fresh seeded initialization. `on_log` sees
/// each log record as it is produced.
inline TrainResult train(const TrainConfig& cfg, ModelConfig mc, const Vocab& vocab, const SchemaSet& schemas,
                         const std::vector<Document>& train_docs,
                         const std::function<void(const Json&)>& on_log = {}) {
  cfg.validate();
  if (train_docs.empty()) throw InputError("no training documents");
  mc.vocab_size = vocab.size();
  mc.validate();

  const auto examples = make_examples(train_docs, schemas, vocab, mc);
  const auto dev = dev_slice(train_docs, cfg.dev_size, cfg.seed);
  const int per_epoch = static_cast<int>((examples.size() + cfg.batch_size - 1) / cfg.batch_size);
  const int total = cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * per_epoch;

  auto params = init_params<float>(mc, cfg.seed);
  auto grads = params.zeros_like();
  auto m1 = params.zeros_like();
  auto m2 = params.zeros_like();
  std::mt19937_64 order_rng(cfg.seed + 1);
  std::mt19937_64 drop_rng(cfg.seed + 2);
  const Dropout dropout{mc.dropout, &drop_rng};

  TrainResult result;
  result.total_steps = total;
  std::vector<std::size_t> order(examples.size());
  std::size_t cursor = order.size();

  auto evaluate_dev = [&](int step) {
    const auto preds = predict_all(params, mc, vocab, schemas, dev, cfg.delta);
    const double f1 = score_documents(dev, preds).f1();
    if (f1 > result.best_dev_f1) {
      result.best_dev_f1 = f1;
      result.best_step = step;
      result.best.params = params;
    }
    return f1;
  };

  for (int step = 1; step <= total; ++step) {
    grads.set_zero();
    std::vector<std::size_t> batch;
    while (static_cast<int>(batch.size()) < cfg.batch_size) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
        if (!batch.empty()) break;  // an epoch boundary ends the batch
      }
      batch.push_back(order[cursor++]);
    }
    const float weight = 1.0f / static_cast<float>(batch.size());
    double loss = 0.0;
    for (auto i : batch) loss += loss_and_grad(params, mc, examples[i], grads, weight, dropout);
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) throw NumericError("non-finite loss at step " + std::to_string(step));

    double norm2 = 0.0;
    for (const auto& g : grads.tensors)
      for (float v : g.data) norm2 += static_cast<double>(v) * v;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient at step " + std::to_string(step));
    const float clip = norm > cfg.clip_norm ? static_cast<float>(cfg.clip_norm / norm) : 1.0f;

    const double lr = learning_rate_at(step, total, cfg.learning_rate, cfg.warmup_ratio);
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    for (std::size_t t = 0; t < params.count(); ++t) {
      auto& p = params[t].data;
      const auto& g = grads[t].data;
      auto& a = m1[t].data;
      auto& b = m2[t].data;
      const bool wd = decays(params[t]);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]) * clip;
        a[i] = static_cast<float>(cfg.beta1 * a[i] + (1 - cfg.beta1) * gi);
        b[i] = static_cast<float>(cfg.beta2 * b[i] + (1 - cfg.beta2) * gi * gi);
        double update = (a[i] / bc1) / (std::sqrt(b[i] / bc2) + cfg.adam_eps);
        if (wd) update += cfg.weight_decay * p[i];
        p[i] = static_cast<float>(p[i] - lr * update);
      }
    }

    Json record{{"step", step}, {"loss", loss}, {"lr", lr}};
    if (step % cfg.eval_every_steps == 0 || step == total) record["dev_f1"] = evaluate_dev(step);
    if (on_log) on_log(record);
    result.log.push_back(std::move(record));
  }

  result.best.config = mc;
  result.best.vocab = vocab;
  result.best.extra = Json{{"best_step", result.best_step}, {"dev_f1", result.best_dev_f1}, {"total_steps", total}};
  return result;
}

}  // namespace ppn
