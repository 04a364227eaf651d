#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ppn/error.hpp"

namespace ppn {

using Json = nlohmann::ordered_json;

struct BBox {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int height() const { return y2 - y1; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Token {
  std::string text;
  BBox bbox;
  friend bool operator==(const Token&, const Token&) = default;
};

enum class Role { key, value };

// Half-open token-index range [start, end).
struct Span {
  int start = 0;
  int end = 0;
  int size() const { return end - start; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct Entity {
  Role role = Role::value;
  std::string label;  // empty for keys: a key takes its type from the linked value
  std::vector<Span> spans;
  friend bool operator==(const Entity&, const Entity&) = default;
};

struct KVLink {
  int key = 0;
  int value = 0;
  friend bool operator==(const KVLink&, const KVLink&) = default;
};

struct Document {
  std::string id;
  std::string form_category;
  int page_width = 1000;
  int page_height = 1000;
  std::vector<Token> tokens;
  std::vector<Entity> entities;
  std::vector<KVLink> kv_links;

  friend bool operator==(const Document&, const Document&) = default;

  // Index of the KVLink whose value is `value_index`, if any.
  std::optional<int> key_of(int value_index) const {
    for (const auto& link : kv_links)
      if (link.value == value_index) return link.key;
    return std::nullopt;
  }
};

inline std::string to_string(Role role) { return role == Role::key ? "key" : "value"; }

/// Throws ValidationError naming the document when any structural invariant
/// of tokens, entities or key-value links is broken.
inline void validate(const Document& doc) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("document '" + doc.id + "': " + what);
  };
  if (doc.id.empty()) throw ValidationError("document with empty id");
  if (doc.page_width <= 0 || doc.page_height <= 0) fail("non-positive page size");
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const auto& t = doc.tokens[i];
    const auto& b = t.bbox;
    if (t.text.empty()) fail("token " + std::to_string(i) + " has empty text");
    if (std::any_of(t.text.begin(), t.text.end(),
                    [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }))
      fail("token " + std::to_string(i) + " contains whitespace");
    if (b.x1 > b.x2 || b.y1 > b.y2) fail("token " + std::to_string(i) + " has an inverted bbox");
    if (b.x1 < 0 || b.y1 < 0 || b.x2 > doc.page_width || b.y2 > doc.page_height)
      fail("token " + std::to_string(i) + " bbox outside the page");
  }
  const int n_tokens = static_cast<int>(doc.tokens.size());
  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    const auto& ent = doc.entities[e];
    const std::string where = "entity " + std::to_string(e);
    if (ent.spans.empty()) fail(where + " has no spans");
    if (ent.role == Role::value && ent.label.empty()) fail(where + " is a value without a label");
    for (std::size_t s = 0; s < ent.spans.size(); ++s) {
      const auto& sp = ent.spans[s];
      if (sp.start >= sp.end) fail(where + " has an empty or inverted span");
      if (sp.start < 0 || sp.end > n_tokens) fail(where + " span out of token range");
      if (s > 0 && ent.spans[s - 1].end > sp.start) fail(where + " spans overlap or are unsorted");
    }
  }
  const int n_entities = static_cast<int>(doc.entities.size());
  std::vector<int> value_seen(doc.entities.size(), 0);
  for (const auto& link : doc.kv_links) {
    if (link.key < 0 || link.key >= n_entities || link.value < 0 || link.value >= n_entities)
      fail("kv link references a missing entity");
    if (doc.entities[link.key].role != Role::key) fail("kv link source is not a key");
    if (doc.entities[link.value].role != Role::value) fail("kv link target is not a value");
    if (++value_seen[link.value] > 1) fail("value entity linked to more than one key");
  }
}

// ---- JSON mapping ----------------------------------------------------------

inline Json to_json(const Document& doc) {
  Json tokens = Json::array();
  for (const auto& t : doc.tokens)
    tokens.push_back({{"text", t.text}, {"bbox", {t.bbox.x1, t.bbox.y1, t.bbox.x2, t.bbox.y2}}});
  Json entities = Json::array();
  for (const auto& e : doc.entities) {
    Json spans = Json::array();
    for (const auto& s : e.spans) spans.push_back({s.start, s.end});
    entities.push_back({{"role", to_string(e.role)}, {"label", e.label}, {"spans", spans}});
  }
  Json links = Json::array();
  for (const auto& l : doc.kv_links) links.push_back({{"key", l.key}, {"value", l.value}});
  return Json{{"id", doc.id},
              {"form_category", doc.form_category},
              {"page_width", doc.page_width},
              {"page_height", doc.page_height},
              {"tokens", tokens},
              {"entities", entities},
              {"kv_links", links}};
}

inline Document document_from_json(const Json& j) {
  Document doc;
  doc.id = j.at("id").get<std::string>();
  doc.form_category = j.at("form_category").get<std::string>();
  doc.page_width = j.at("page_width").get<int>();
  doc.page_height = j.at("page_height").get<int>();
  for (const auto& t : j.at("tokens")) {
    const auto& b = t.at("bbox");
    if (!b.is_array() || b.size() != 4) throw ParseError("bbox must have 4 numbers");
    doc.tokens.push_back({t.at("text").get<std::string>(),
                          {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()}});
  }
  for (const auto& e : j.at("entities")) {
    Entity ent;
    const auto role = e.at("role").get<std::string>();
    if (role == "key") ent.role = Role::key;
    else if (role == "value") ent.role = Role::value;
    else throw ParseError("role must be 'key' or 'value'");
    ent.label = e.at("label").is_null() ? std::string{} : e.at("label").get<std::string>();
    for (const auto& s : e.at("spans")) {
      if (!s.is_array() || s.size() != 2) throw ParseError("span must be [start,end]");
      ent.spans.push_back({s[0].get<int>(), s[1].get<int>()});
    }
    doc.entities.push_back(std::move(ent));
  }
  for (const auto& l : j.at("kv_links"))
    doc.kv_links.push_back({l.at("key").get<int>(), l.at("value").get<int>()});
  return doc;
}

inline void save_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& d : docs) out << to_json(d).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<Document> parse_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document doc;
    try {
      doc = document_from_json(Json::parse(line));
    } catch (const Json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    validate(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  return parse_corpus(in);
}

}  // namespace ppn
