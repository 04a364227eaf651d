#pragma once

#include <string>
#include <vector>

#include "ppn/corpus.hpp"
#include "ppn/eval.hpp"
#include "ppn/train.hpp"

namespace ppn {

struct ProtocolRun {
  std::string name;  // zero_shot, few_shot_k, full
  SplitSpec split;
  Metrics metrics;
  TrainResult training;
};

inline std::string protocol_name(SplitMode mode, int k) {
  return mode == SplitMode::few_shot ? "few_shot_" + std::to_string(k) : to_string(mode);
}

/// Trains on the split's train side (vocab from those documents plus schema
/// labels) and evaluates on its test side.
inline ProtocolRun run_split(const GeneratedCorpus& corpus, const SplitSpec& split, const ModelConfig& mc,
                             const TrainConfig& tc, const std::function<void(const Json&)>& on_log = {}) {
  ProtocolRun run;
  run.name = protocol_name(split.mode, split.k);
  run.split = split;
  const auto train_docs = select_documents(corpus.docs, split.train_ids);
  const auto test_docs = select_documents(corpus.docs, split.test_ids);
  const auto vocab = Vocab::build(train_docs, corpus.schemas);
  run.training = train(tc, mc, vocab, corpus.schemas, train_docs, on_log);
  run.metrics = evaluate(run.training.best, corpus.schemas, test_docs, tc.delta, run.name);
  return run;
}

struct ProtocolRequest {
  SplitMode mode;
  int k = 0;
};

inline std::vector<ProtocolRun> run_protocol(const GeneratedCorpus& corpus, const std::vector<ProtocolRequest>& modes,
                                             std::uint64_t split_seed, const ModelConfig& mc, const TrainConfig& tc) {
  std::vector<ProtocolRun> out;
  for (const auto& m : modes) out.push_back(run_split(corpus, make_splits(corpus.docs, m.mode, m.k, split_seed), mc, tc));
  return out;
}

/// Report keyed by protocol name, plus the full >= few-shot >= zero-shot
/// ordering when those runs are present (reported, not enforced).
inline Json protocol_report(const std::vector<ProtocolRun>& runs) {
  Json report = Json::object();
  const ProtocolRun* zero = nullptr;
  const ProtocolRun* few = nullptr;
  const ProtocolRun* full = nullptr;
  for (const auto& r : runs) {
    Json entry = r.metrics.to_json();
    entry["train_documents"] = r.split.train_ids.size();
    entry["test_documents"] = r.split.test_ids.size();
    entry["best_step"] = r.training.best_step;
    entry["dev_f1"] = r.training.best_dev_f1;
    report[r.name] = entry;
    if (r.split.mode == SplitMode::zero_shot) zero = &r;
    if (r.split.mode == SplitMode::few_shot && (!few || r.split.k > few->split.k)) few = &r;
    if (r.split.mode == SplitMode::full) full = &r;
  }
  if (zero && few && full) {
    report["ordering"] = Json{{"full_ge_few_shot", full->metrics.f1() >= few->metrics.f1()},
                              {"few_shot_ge_zero_shot", few->metrics.f1() >= zero->metrics.f1()}};
  }
  return report;
}

// ---- ablations -------------------------------------------------------------

struct AblationRow {
  std::string variant;  // full, -sin, -key, -QCI, -QHI, -QTI
  ModelConfig config;
  Metrics metrics;
  TrainResult training;
};

inline const std::vector<std::string>& ablation_flags() {
  static const std::vector<std::string> flags = {"sin", "key", "qci", "qhi", "qti"};
  return flags;
}

inline std::string ablation_name(const std::string& flag) {
  if (flag == "sin" || flag == "key") return "-" + flag;
  std::string upper = flag;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return "-" + upper;
}

inline ModelConfig ablate_config(ModelConfig c, const std::string& flag) {
  if (flag == "sin") c.use_sinusoidal = false;
  else if (flag == "key") c.use_key_channels = false;
  else if (flag == "qci") c.use_qci = false;
  else if (flag == "qhi") c.use_qhi = false;
  else if (flag == "qti") c.use_qti = false;
  else throw ConfigError("unknown ablation flag '" + flag + "' (expected one of sin, key, qci, qhi, qti)");
  return c;
}

/// The full model first, then one row per disabled flag, all on the same split
/// and seeds.
inline std::vector<AblationRow> run_ablations(const GeneratedCorpus& corpus, const SplitSpec& split,
                                              const std::vector<std::string>& flags, const ModelConfig& mc,
                                              const TrainConfig& tc) {
  std::vector<std::pair<std::string, ModelConfig>> variants{{"full", mc}};
  for (const auto& f : flags) variants.emplace_back(ablation_name(f), ablate_config(mc, f));
  std::vector<AblationRow> rows;
  for (const auto& [name, cfg] : variants) {
    auto run = run_split(corpus, split, cfg, tc);
    rows.push_back({name, run.training.best.config, run.metrics, std::move(run.training)});
    rows.back().metrics.mode = name;
  }
  return rows;
}

inline Json ablation_report(const std::vector<AblationRow>& rows) {
  Json out = Json::array();
  const double base = rows.empty() ? 0.0 : rows.front().metrics.f1();
  for (const auto& r : rows)
    out.push_back({{"variant", r.variant},
                   {"n_link_types", r.config.n_link_types()},
                   {"precision", r.metrics.precision()},
                   {"recall", r.metrics.recall()},
                   {"f1", r.metrics.f1()},
                   {"delta_f1", r.metrics.f1() - base}});
  return out;
}

}  // namespace ppn
