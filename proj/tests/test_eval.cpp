#include <gtest/gtest.h>

#include "ppn/eval.hpp"
#include "test_util.hpp"

namespace ppn {
namespace {

Document gold_doc() {
  auto d = testing::line_doc({"org", "Tax", "Bureau", "date", "May", "1", "2020"});
  d.entities = {{Role::key, "", {{0, 1}}}, {Role::value, "org", {{1, 3}}}, {Role::value, "date", {{4, 7}}}};
  d.kv_links = {{0, 1}};
  return d;
}

Prediction pred_of(std::map<std::string, std::vector<std::vector<Span>>> answers) {
  Prediction p;
  p.doc_id = "doc";
  for (auto& [label, ents] : answers)
    for (auto& spans : ents) p.answers[label].push_back({spans, std::nullopt});
  return p;
}

TEST(Metrics, PerfectPrediction) {
  const auto m = score_document(gold_doc(), pred_of({{"org", {{{1, 3}}}}, {"date", {{{4, 7}}}}}));
  EXPECT_DOUBLE_EQ(m.precision(), 1.0);
  EXPECT_DOUBLE_EQ(m.recall(), 1.0);
  EXPECT_DOUBLE_EQ(m.f1(), 1.0);
}

TEST(Metrics, NoPredictions) {
  const auto m = score_document(gold_doc(), pred_of({}));
  EXPECT_EQ(m.counts.gold, 2u);
  EXPECT_DOUBLE_EQ(m.precision(), 0.0);
  EXPECT_DOUBLE_EQ(m.recall(), 0.0);
  EXPECT_DOUBLE_EQ(m.f1(), 0.0);
}

TEST(Metrics, HalfRight) {
  // one correct, one wrong: P = 1/2, R = 1/2
  const auto m = score_document(gold_doc(), pred_of({{"org", {{{1, 3}}}}, {"date", {{{4, 6}}}}}));
  EXPECT_DOUBLE_EQ(m.precision(), 0.5);
  EXPECT_DOUBLE_EQ(m.recall(), 0.5);
  EXPECT_DOUBLE_EQ(m.f1(), 0.5);
  EXPECT_DOUBLE_EQ(m.per_label.at("org").f1(), 1.0);
  EXPECT_DOUBLE_EQ(m.per_label.at("date").f1(), 0.0);
}

TEST(Metrics, DuplicatesCountOnce) {
  const auto m = score_document(gold_doc(), pred_of({{"org", {{{1, 3}}, {{1, 3}}}}}));
  EXPECT_EQ(m.counts.predicted, 1u);
  EXPECT_EQ(m.counts.correct, 1u);
}

TEST(Metrics, SpanShiftIsWrong) {
  for (const Span s : {Span{0, 3}, Span{2, 3}, Span{1, 2}, Span{1, 4}}) {
    const auto m = score_document(gold_doc(), pred_of({{"org", {{s}}}}));
    EXPECT_EQ(m.counts.correct, 0u);
  }
}

TEST(Metrics, WrongLabelIsWrong) {
  const auto m = score_document(gold_doc(), pred_of({{"date", {{{1, 3}}}}}));
  EXPECT_EQ(m.counts.correct, 0u);
  EXPECT_EQ(m.counts.predicted, 1u);
}

TEST(Metrics, KeySpansNotScored) {
  auto p = pred_of({{"org", {{{1, 3}}}}});
  const auto plain = score_document(gold_doc(), p);
  p.answers["org"][0].key_spans = std::vector<Span>{{5, 6}};
  const auto keyed = score_document(gold_doc(), p);
  EXPECT_EQ(plain.counts.correct, keyed.counts.correct);
  EXPECT_EQ(plain.counts.predicted, keyed.counts.predicted);
}

TEST(Metrics, DiscontinuousMustMatchAllSpans) {
  auto d = gold_doc();
  d.entities[1].spans = {{1, 2}, {3, 4}};
  EXPECT_EQ(score_document(d, pred_of({{"org", {{{1, 2}, {3, 4}}}}})).counts.correct, 1u);
  EXPECT_EQ(score_document(d, pred_of({{"org", {{{1, 2}}}}})).counts.correct, 0u);
}

TEST(Metrics, CorpusLevelIsMicroAveraged) {
  auto a = gold_doc();
  auto b = gold_doc();
  b.id = "b";
  auto pa = pred_of({{"org", {{{1, 3}}}}, {"date", {{{4, 7}}}}});
  auto pb = pred_of({});
  pb.doc_id = "b";
  const auto m = score_documents({a, b}, {pa, pb}, "few_shot");
  EXPECT_EQ(m.counts.gold, 4u);
  EXPECT_EQ(m.counts.correct, 2u);
  EXPECT_DOUBLE_EQ(m.precision(), 1.0);
  EXPECT_DOUBLE_EQ(m.recall(), 0.5);
  EXPECT_NEAR(m.f1(), 2.0 / 3.0, 1e-12);
  EXPECT_THROW(score_documents({a, b}, {pb, pa}), EvaluationError);
  EXPECT_THROW(score_documents({a}, {pa, pb}), EvaluationError);
}

TEST(Metrics, JsonFields) {
  const auto m = score_documents({gold_doc()}, {pred_of({{"org", {{{1, 3}}}}})}, "zero_shot");
  const Json j = m.to_json();
  for (const char* k : {"mode", "precision", "recall", "f1", "per_label", "counts"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["mode"], "zero_shot");
  EXPECT_EQ(j["counts"]["gold"], 2);
  EXPECT_TRUE(j["per_label"]["date"].contains("f1"));
}

// ---- inference -------------------------------------------------------------

struct Tiny {
  GeneratedCorpus corpus;
  Vocab vocab;
  ModelConfig config;
  ParamSet<float> params;
};

Tiny tiny_model(int categories = 2, int min_types = 6) {
  Tiny t;
  auto g = testing::small_generator(categories, 4);
  g.min_types = min_types;
  g.max_types = std::max(g.max_types, min_types);
  t.corpus = generate_corpus(g);
  t.vocab = Vocab::build(t.corpus.docs, t.corpus.schemas);
  t.config.vocab_size = t.vocab.size();
  t.config.d_model = 16;
  t.config.n_layers = 1;
  t.config.n_heads = 2;
  t.config.d_ff = 16;
  t.config.d_head_score = 8;
  t.params = init_params<float>(t.config, 3);
  return t;
}

TEST(Predict, EveryQuestionAnswered) {
  const auto t = tiny_model();
  const auto& d = t.corpus.docs[0];
  const auto qs = build_question_set(d, t.corpus.schemas);
  const auto p = predict(t.params, t.config, t.vocab, qs, d);
  EXPECT_EQ(p.doc_id, d.id);
  EXPECT_EQ(p.answers.size(), qs.size());
}

TEST(Predict, VocabMismatchRejected) {
  const auto t = tiny_model();
  const auto other = testing::vocab_of({"a", "b"});
  const auto& d = t.corpus.docs[0];
  EXPECT_THROW(predict(t.params, t.config, other, build_question_set(d, t.corpus.schemas), d), EvaluationError);
}

TEST(Predict, WindowedMatchesSingleWindowStructure) {
  auto t = tiny_model();
  const auto& d = t.corpus.docs[0];
  const auto qs = build_question_set(d, t.corpus.schemas);
  auto narrow = t.config;
  narrow.max_question_window = 4;
  const auto p = predict(t.params, narrow, t.vocab, qs, d);
  EXPECT_EQ(p.answers.size(), qs.size());
}

TEST(Predict, EvaluateUsesCheckpoint) {
  const auto t = tiny_model();
  Checkpoint ck{t.config, t.vocab, t.params, Json::object()};
  const auto m = evaluate(ck, t.corpus.schemas, t.corpus.docs, 0.5, "full");
  EXPECT_EQ(m.mode, "full");
  EXPECT_EQ(m.counts.gold, corpus_stats(t.corpus.docs).values);
}

TEST(Speed, ReportsBothModes) {
  const auto t = tiny_model(1, 8);
  std::vector<Document> docs(t.corpus.docs.begin(), t.corpus.docs.end());
  while (docs.size() < 40) docs.insert(docs.end(), t.corpus.docs.begin(), t.corpus.docs.end());
  const auto r = speed_bench(t.params, t.config, t.vocab, t.corpus.schemas, docs, 8);
  EXPECT_EQ(r.report.n_documents, docs.size());
  EXPECT_EQ(r.report.n_questions_total, docs.size() * 8);
  EXPECT_EQ(r.parallel.size(), docs.size());
  EXPECT_GT(r.report.ratio(), 1.0);
  EXPECT_EQ(r.report.to_json()["reference_ratio"], 6.4);
}

TEST(Speed, TooManyQuestionsRejected) {
  const auto t = tiny_model(1, 6);
  EXPECT_THROW(speed_bench(t.params, t.config, t.vocab, t.corpus.schemas, t.corpus.docs, 50), BenchmarkError);
  EXPECT_THROW(speed_bench(t.params, t.config, t.vocab, t.corpus.schemas, {}, 2), BenchmarkError);
  EXPECT_THROW(speed_bench(t.params, t.config, t.vocab, t.corpus.schemas, t.corpus.docs, 0), BenchmarkError);
}

TEST(Speed, TooShortToMeasureRejected) {
  const auto t = tiny_model(1, 6);
  auto one = t.corpus.docs[0];
  one.tokens.resize(1);
  one.entities.clear();
  one.kv_links.clear();
  EXPECT_THROW(speed_bench(t.params, t.config, t.vocab, t.corpus.schemas, {one}, 1), BenchmarkError);
}

}  // namespace
}  // namespace ppn
