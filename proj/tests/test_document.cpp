#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ppn/document.hpp"
#include "test_util.hpp"

namespace ppn {
namespace {

Document sample_doc() {
  auto d = testing::line_doc({"total", "CNY", "50.00", "seal"});
  d.entities = {{Role::key, "", {{0, 1}}}, {Role::value, "total amount", {{1, 3}}}};
  d.kv_links = {{0, 1}};
  return d;
}

TEST(Document, JsonRoundTrip) {
  const auto d = sample_doc();
  EXPECT_EQ(document_from_json(to_json(d)), d);
}

TEST(Document, JsonFieldsExact) {
  const Json j = to_json(sample_doc());
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"id", "form_category", "page_width", "page_height", "tokens", "entities",
                                            "kv_links"}));
  EXPECT_EQ(j["tokens"][0]["bbox"], Json::array({10, 100, 60, 120}));
  EXPECT_EQ(j["entities"][1]["spans"], Json::parse("[[1,3]]"));
}

TEST(Document, ValidAcceptsSample) { EXPECT_NO_THROW(validate(sample_doc())); }

TEST(Document, InvertedBBoxRejected) {
  auto d = sample_doc();
  d.tokens[0].bbox = {50, 100, 10, 120};
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Document, SpanOutOfRangeRejected) {
  auto d = sample_doc();
  d.entities[1].spans = {{3, 5}};
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Document, OverlappingSpansRejected) {
  auto d = sample_doc();
  d.entities[1].spans = {{1, 3}, {2, 4}};
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Document, LinkMustJoinKeyToValue) {
  auto d = sample_doc();
  d.kv_links = {{1, 0}};
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Document, ValueLinkedTwiceRejected) {
  auto d = sample_doc();
  d.entities.push_back({Role::key, "", {{3, 4}}});
  d.kv_links.push_back({2, 1});
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Document, ValidationErrorNamesDocument) {
  auto d = sample_doc();
  d.id = "form-42";
  d.tokens[0].bbox = {50, 100, 10, 120};
  try {
    validate(d);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("form-42"), std::string::npos);
  }
}

TEST(Document, EmptyCorpusFile) {
  std::istringstream in("");
  EXPECT_TRUE(parse_corpus(in).empty());
}

TEST(Document, MalformedLineReportsLineNumber) {
  std::istringstream in(to_json(sample_doc()).dump() + "\n{not json\n");
  try {
    parse_corpus(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Document, InvalidRecordIsValidationError) {
  auto d = sample_doc();
  Json j = to_json(d);
  j["tokens"][1]["bbox"] = Json::array({90, 100, 80, 120});
  std::istringstream in(j.dump() + "\n");
  EXPECT_THROW(parse_corpus(in), ValidationError);
}

TEST(Document, SaveLoadRoundTrip) {
  const auto dir = testing::temp_dir("document");
  auto a = sample_doc();
  auto b = sample_doc();
  b.id = "other";
  b.kv_links.clear();
  save_corpus({a, b}, (dir / "c.jsonl").string());
  const auto back = load_corpus((dir / "c.jsonl").string());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
}

TEST(Document, KeyOf) {
  const auto d = sample_doc();
  EXPECT_EQ(d.key_of(1), 0);
  EXPECT_FALSE(d.key_of(0).has_value());
}

}  // namespace
}  // namespace ppn
