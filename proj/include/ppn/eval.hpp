#pragma once

#include <chrono>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ppn/checkpoint.hpp"
#include "ppn/linking.hpp"
#include "ppn/model.hpp"
#include "ppn/serialize.hpp"

namespace ppn {

// ---- metrics ---------------------------------------------------------------

struct Counts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  Counts& operator+=(const Counts& o) {
    gold += o.gold;
    predicted += o.predicted;
    correct += o.correct;
    return *this;
  }
  double precision() const { return predicted ? static_cast<double>(correct) / predicted : 0.0; }
  double recall() const { return gold ? static_cast<double>(correct) / gold : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  Json to_json() const { return Json{{"gold", gold}, {"predicted", predicted}, {"correct", correct}}; }
};

struct Metrics {
  std::string mode;
  Counts counts;
  std::map<std::string, Counts> per_label;

  double precision() const { return counts.precision(); }
  double recall() const { return counts.recall(); }
  double f1() const { return counts.f1(); }

  Metrics& operator+=(const Metrics& o) {
    counts += o.counts;
    for (const auto& [label, c] : o.per_label) per_label[label] += c;
    return *this;
  }

  Json to_json() const {
    Json per = Json::object();
    for (const auto& [label, c] : per_label)
      per[label] = Json{{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}, {"counts", c.to_json()}};
    return Json{{"mode", mode},   {"precision", precision()}, {"recall", recall()},
                {"f1", f1()},     {"per_label", per},         {"counts", counts.to_json()}};
  }
};

/// Entity-level exact match of value spans for one document. Duplicate
/// predictions count once; each gold entity is matched at most once. Key
/// spans are not scored.
inline Metrics score_document(const Document& gold_doc, const Prediction& pred) {
  std::map<std::string, std::vector<std::vector<Span>>> gold;
  for (const auto& e : gold_doc.entities)
    if (e.role == Role::value) gold[e.label].push_back(e.spans);
  Metrics m;
  for (const auto& [label, spans] : gold) m.per_label[label].gold += spans.size();
  for (const auto& [label, ents] : pred.answers) {
    std::set<std::vector<Span>> unique;
    for (const auto& e : ents) unique.insert(e.spans);
    auto& c = m.per_label[label];
    c.predicted += unique.size();
    auto it = gold.find(label);
    if (it == gold.end()) continue;
    std::vector<char> used(it->second.size(), 0);
    for (const auto& spans : unique)
      for (std::size_t g = 0; g < it->second.size(); ++g)
        if (!used[g] && it->second[g] == spans) {
          used[g] = 1;
          ++c.correct;
          break;
        }
  }
  for (const auto& [label, c] : m.per_label) m.counts += c;
  return m;
}

inline Metrics score_documents(const std::vector<Document>& docs, const std::vector<Prediction>& preds,
                               const std::string& mode = "") {
  if (docs.size() != preds.size()) throw EvaluationError("document and prediction counts differ");
  Metrics m;
  m.mode = mode;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].id != preds[i].doc_id)
      throw EvaluationError("prediction for '" + preds[i].doc_id + "' paired with document '" + docs[i].id + "'");
    m += score_document(docs[i], preds[i]);
  }
  return m;
}

// ---- inference -------------------------------------------------------------

template <class T>
Prediction predict_windows(const ParamSet<T>& params, const ModelConfig& c, std::vector<InputSample> windows,
                           double delta) {
  std::vector<Prediction> parts;
  for (auto& w : windows) {
    const auto ps = prepare(std::move(w), c);
    const auto z = forward_scores(params, c, ps);
    parts.push_back(decode(binarize(z, ps.mask, delta), ps.sample));
  }
  return merge_windows(parts);
}

template <class T>
Prediction predict(const ParamSet<T>& params, const ModelConfig& c, const Vocab& vocab,
                   const std::vector<std::string>& questions, const Document& doc, double delta = 0.5) {
  if (vocab.size() != c.vocab_size)
    throw EvaluationError("vocab has " + std::to_string(vocab.size()) + " entries but the model expects " +
                          std::to_string(c.vocab_size));
  auto pred = predict_windows(params, c, assemble_input(questions, doc, vocab, c.serialize_options()), delta);
  pred.doc_id = doc.id;
  for (const auto& q : questions) pred.answers[q];
  return pred;
}

template <class T>
std::vector<Prediction> predict_all(const ParamSet<T>& params, const ModelConfig& c, const Vocab& vocab,
                                    const SchemaSet& schemas, const std::vector<Document>& docs, double delta = 0.5) {
  std::vector<Prediction> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(predict(params, c, vocab, build_question_set(d, schemas), d, delta));
  return out;
}

inline Metrics evaluate(const Checkpoint& ck, const SchemaSet& schemas, const std::vector<Document>& docs,
                        double delta = 0.5, const std::string& mode = "") {
  return score_documents(docs, predict_all(ck.params, ck.config, ck.vocab, schemas, docs, delta), mode);
}

// ---- speed benchmark -------------------------------------------------------

struct SpeedReport {
  std::size_t n_documents = 0;
  std::size_t n_questions_total = 0;
  int questions_per_document = 0;
  double parallel_wall_time = 0.0;    // seconds
  double sequential_wall_time = 0.0;  // seconds
  double ratio() const { return sequential_wall_time / parallel_wall_time; }

  Json to_json() const {
    return Json{{"n_documents", n_documents},
                {"n_questions_total", n_questions_total},
                {"questions_per_document", questions_per_document},
                {"parallel_wall_time", parallel_wall_time},
                {"sequential_wall_time", sequential_wall_time},
                {"ratio", ratio()},
                {"reference_ratio", 6.4}};
  }
};

struct SpeedResult {
  SpeedReport report;
  std::vector<Prediction> parallel;
  std::vector<Prediction> sequential;
};

/// Times all-questions-at-once against one-question-per-pass inference, both
/// including serialization, masking, scoring and decoding. The first document
/// is run once in each mode beforehand and not timed.
template <class T>
SpeedResult speed_bench(const ParamSet<T>& params, const ModelConfig& c, const Vocab& vocab, const SchemaSet& schemas,
                        const std::vector<Document>& docs, int questions_per_doc, double delta = 0.5) {
  if (docs.empty()) throw BenchmarkError("no documents to benchmark");
  if (questions_per_doc < 1) throw BenchmarkError("questions per document must be >= 1");
  std::vector<std::vector<std::string>> questions;
  for (const auto& d : docs) {
    auto qs = build_question_set(d, schemas);
    if (static_cast<int>(qs.size()) < questions_per_doc)
      throw BenchmarkError("document '" + d.id + "' has " + std::to_string(qs.size()) + " value types, fewer than " +
                           std::to_string(questions_per_doc) + " questions");
    qs.resize(static_cast<std::size_t>(questions_per_doc));
    questions.push_back(std::move(qs));
  }
  auto run_parallel = [&](std::size_t i) { return predict(params, c, vocab, questions[i], docs[i], delta); };
  auto run_sequential = [&](std::size_t i) {
    std::vector<Prediction> parts;
    for (const auto& q : questions[i]) parts.push_back(predict(params, c, vocab, {q}, docs[i], delta));
    auto p = merge_windows(parts);
    p.doc_id = docs[i].id;
    return p;
  };
  run_parallel(0);
  run_sequential(0);

  using Clock = std::chrono::steady_clock;
  SpeedResult out;
  auto t0 = Clock::now();
  for (std::size_t i = 0; i < docs.size(); ++i) out.parallel.push_back(run_parallel(i));
  auto t1 = Clock::now();
  for (std::size_t i = 0; i < docs.size(); ++i) out.sequential.push_back(run_sequential(i));
  auto t2 = Clock::now();

  auto& r = out.report;
  r.n_documents = docs.size();
  r.questions_per_document = questions_per_doc;
  r.n_questions_total = docs.size() * static_cast<std::size_t>(questions_per_doc);
  r.parallel_wall_time = std::chrono::duration<double>(t1 - t0).count();
  r.sequential_wall_time = std::chrono::duration<double>(t2 - t1).count();
  if (r.parallel_wall_time + r.sequential_wall_time < 0.010 || r.parallel_wall_time <= 0.0)
    throw BenchmarkError("measured under 10 ms in total; benchmark more documents");
  return out;
}

}  // namespace ppn
