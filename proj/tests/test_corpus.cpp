#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ppn/corpus.hpp"
#include "test_util.hpp"

namespace ppn {
namespace {

const GeneratedCorpus& default_corpus() {
  static const GeneratedCorpus c = generate_corpus(GeneratorConfig{});
  return c;
}

std::string file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Generator, DefaultCounts) {
  const auto& c = default_corpus();
  EXPECT_EQ(c.docs.size(), 300u);
  EXPECT_EQ(c.schemas.categories().size(), 10u);
}

TEST(Generator, EveryDocumentValidates) {
  for (const auto& d : default_corpus().docs) EXPECT_NO_THROW(validate(d)) << d.id;
}

TEST(Generator, NoKeyRatioNearTarget) {
  const auto s = corpus_stats(default_corpus().docs);
  EXPECT_GE(s.no_key_ratio(), 0.205);
  EXPECT_LE(s.no_key_ratio(), 0.405);
}

TEST(Generator, AllEntityKindsPresent) {
  const auto s = corpus_stats(default_corpus().docs);
  EXPECT_GT(s.keyless_values, 0u);
  EXPECT_GT(s.values, s.keyless_values);
  EXPECT_GT(s.multi_span_values, 0u);
}

TEST(Generator, LinksJoinKeyToValue) {
  for (const auto& d : default_corpus().docs)
    for (const auto& l : d.kv_links) {
      EXPECT_EQ(d.entities[static_cast<std::size_t>(l.key)].role, Role::key);
      EXPECT_EQ(d.entities[static_cast<std::size_t>(l.value)].role, Role::value);
    }
}

TEST(Generator, ValueLabelsBelongToCategory) {
  const auto& c = default_corpus();
  for (const auto& d : c.docs) {
    const auto& types = c.schemas.at(d.form_category).value_types;
    for (const auto& e : d.entities)
      if (e.role == Role::value) {
        EXPECT_NE(std::find(types.begin(), types.end(), e.label), types.end());
      }
  }
}

TEST(Generator, SmallWordVocabulary) {
  std::set<std::string> words;
  for (const auto& d : default_corpus().docs)
    for (const auto& t : d.tokens) words.insert(t.text);
  EXPECT_LE(words.size(), 2000u);
}

TEST(Generator, Deterministic) {
  const auto dir = testing::temp_dir("corpus_det");
  const auto cfg = testing::small_generator();
  save_corpus(generate_corpus(cfg).docs, (dir / "a.jsonl").string());
  save_corpus(generate_corpus(cfg).docs, (dir / "b.jsonl").string());
  EXPECT_EQ(file_text((dir / "a.jsonl").string()), file_text((dir / "b.jsonl").string()));
}

TEST(Generator, SeedChangesCorpus) {
  auto cfg = testing::small_generator();
  const auto a = generate_corpus(cfg);
  cfg.seed += 1;
  EXPECT_NE(generate_corpus(cfg).docs, a.docs);
}

TEST(Generator, NoMultiSpanWhenDisabled) {
  auto cfg = testing::small_generator();
  cfg.multi_span_prob = 0.0;
  for (const auto& d : generate_corpus(cfg).docs)
    for (const auto& e : d.entities) EXPECT_EQ(e.spans.size(), 1u);
}

TEST(Generator, InvalidConfig) {
  GeneratorConfig cfg;
  cfg.categories = 0;
  EXPECT_THROW(generate_corpus(cfg), ConfigError);
  cfg = GeneratorConfig{};
  cfg.docs_per_category = 0;
  EXPECT_THROW(generate_corpus(cfg), ConfigError);
  cfg = GeneratorConfig{};
  cfg.no_key_ratio = 1.5;
  EXPECT_THROW(generate_corpus(cfg), ConfigError);
}

TEST(Generator, CorpusAndSchemaRoundTrip) {
  const auto dir = testing::temp_dir("corpus_rt");
  const auto c = generate_corpus(testing::small_generator());
  save_corpus(c.docs, (dir / "c.jsonl").string());
  save_schema(c.schemas, (dir / "s.json").string());
  EXPECT_EQ(load_corpus((dir / "c.jsonl").string()), c.docs);
  EXPECT_EQ(load_schema((dir / "s.json").string()), c.schemas);
}

// ---- splits ----------------------------------------------------------------

std::set<std::string> categories_of(const std::vector<Document>& docs, const std::vector<std::string>& ids) {
  std::set<std::string> out;
  for (const auto& d : select_documents(docs, ids)) out.insert(d.form_category);
  return out;
}

TEST(Split, ZeroShotSevenThreeCategories) {
  const auto& docs = default_corpus().docs;
  const auto s = make_splits(docs, SplitMode::zero_shot, 0, 7);
  const auto train = categories_of(docs, s.train_ids);
  const auto test = categories_of(docs, s.test_ids);
  EXPECT_EQ(train.size(), 7u);
  EXPECT_EQ(test.size(), 3u);
  for (const auto& c : test) EXPECT_EQ(train.count(c), 0u);
  EXPECT_EQ(s.train_ids.size() + s.test_ids.size(), docs.size());
}

TEST(Split, CategoryTieBreakByName) {
  // 10/10/10 documents: target 21 train documents, greedy in name order
  std::vector<Document> docs;
  for (const std::string cat : {"c", "a", "b"})
    for (int i = 0; i < 10; ++i) {
      auto d = testing::line_doc({"w"}, cat);
      d.id = cat + std::to_string(i);
      docs.push_back(d);
    }
  const auto s = make_splits(docs, SplitMode::zero_shot, 0, 1);
  EXPECT_EQ(categories_of(docs, s.train_ids), (std::set<std::string>{"a", "b"}));
  EXPECT_EQ(categories_of(docs, s.test_ids), (std::set<std::string>{"c"}));
}

TEST(Split, FewShotMovesExactlyK) {
  // one test category of 20 documents
  std::vector<Document> docs;
  for (const std::string cat : {"a", "b", "c"})
    for (int i = 0; i < (cat == "c" ? 20 : 25); ++i) {
      auto d = testing::line_doc({"w"}, cat);
      d.id = cat + std::to_string(100 + i);
      docs.push_back(d);
    }
  const auto zero = make_splits(docs, SplitMode::zero_shot, 0, 3);
  ASSERT_EQ(categories_of(docs, zero.test_ids), (std::set<std::string>{"c"}));
  const auto few = make_splits(docs, SplitMode::few_shot, 5, 3);
  std::size_t moved = 0;
  for (const auto& d : select_documents(docs, few.train_ids)) moved += d.form_category == "c";
  EXPECT_EQ(moved, 5u);
  EXPECT_EQ(few.test_ids.size(), 15u);
}

TEST(Split, FewShotPerTestCategory) {
  const auto& docs = default_corpus().docs;
  const auto zero = make_splits(docs, SplitMode::zero_shot, 0, 7);
  const auto few = make_splits(docs, SplitMode::few_shot, 10, 7);
  const auto test_cats = categories_of(docs, zero.test_ids);
  std::map<std::string, int> moved;
  for (const auto& d : select_documents(docs, few.train_ids))
    if (test_cats.count(d.form_category)) ++moved[d.form_category];
  ASSERT_EQ(moved.size(), test_cats.size());
  for (const auto& [_, n] : moved) EXPECT_EQ(n, 10);
}

TEST(Split, FewShotMonotoneInK) {
  const auto& docs = default_corpus().docs;
  const auto k1 = make_splits(docs, SplitMode::few_shot, 1, 7);
  const auto k5 = make_splits(docs, SplitMode::few_shot, 5, 7);
  const auto k10 = make_splits(docs, SplitMode::few_shot, 10, 7);
  auto subset = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  EXPECT_TRUE(subset(k1.train_ids, k5.train_ids));
  EXPECT_TRUE(subset(k5.train_ids, k10.train_ids));
}

TEST(Split, TrainTestDisjoint) {
  const auto& docs = default_corpus().docs;
  for (auto mode : {SplitMode::zero_shot, SplitMode::few_shot, SplitMode::full}) {
    const auto s = make_splits(docs, mode, 5, 7);
    std::vector<std::string> both;
    std::set_intersection(s.train_ids.begin(), s.train_ids.end(), s.test_ids.begin(), s.test_ids.end(),
                          std::back_inserter(both));
    EXPECT_TRUE(both.empty()) << to_string(mode);
    EXPECT_EQ(s.train_ids.size() + s.test_ids.size(), docs.size());
  }
}

TEST(Split, FullIgnoresCategories) {
  const auto& docs = default_corpus().docs;
  const auto s = make_splits(docs, SplitMode::full, 0, 7);
  EXPECT_EQ(s.train_ids.size(), 210u);
  EXPECT_EQ(s.test_ids.size(), 90u);
  EXPECT_EQ(categories_of(docs, s.test_ids).size(), 10u);
}

TEST(Split, Deterministic) {
  const auto& docs = default_corpus().docs;
  for (auto mode : {SplitMode::zero_shot, SplitMode::few_shot, SplitMode::full})
    EXPECT_EQ(make_splits(docs, mode, 5, 9), make_splits(docs, mode, 5, 9));
}

TEST(Split, InvalidK) { EXPECT_THROW(make_splits(default_corpus().docs, SplitMode::few_shot, 3, 7), SplitError); }

TEST(Split, KTooLargeNamesCategory) {
  std::vector<Document> docs;
  for (const std::string cat : {"alpha", "beta", "gamma"})
    for (int i = 0; i < (cat == "gamma" ? 4 : 10); ++i) {
      auto d = testing::line_doc({"w"}, cat);
      d.id = cat + std::to_string(i);
      docs.push_back(d);
    }
  try {
    make_splits(docs, SplitMode::few_shot, 5, 1);
    FAIL();
  } catch (const SplitError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
}

TEST(Split, FileRoundTrip) {
  const auto dir = testing::temp_dir("split_rt");
  const auto s = make_splits(default_corpus().docs, SplitMode::few_shot, 5, 7);
  save_split(s, (dir / "s.json").string());
  EXPECT_EQ(load_split((dir / "s.json").string()), s);
}

TEST(Split, UnknownIdRejected) {
  EXPECT_THROW(select_documents(default_corpus().docs, {"missing"}), InputError);
}

}  // namespace
}  // namespace ppn
