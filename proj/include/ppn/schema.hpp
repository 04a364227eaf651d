#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ppn/document.hpp"
#include "ppn/error.hpp"

namespace ppn {

using Phrase = std::vector<std::string>;

/// Per-category description of which value types a form may carry and how
/// their keys are phrased.
struct CategorySchema {
  std::string name;
  Phrase title;
  int layout_count = 1;
  std::vector<std::string> value_types;            // sorted labels
  std::map<std::string, std::string> kinds;        // label -> content kind
  std::map<std::string, std::vector<Phrase>> key_phrases;  // label -> variants
  std::vector<std::string> no_key_labels;          // labels that may render without a key
  double no_key_prob = 0.0;
  double multi_span_prob = 0.0;

  friend bool operator==(const CategorySchema&, const CategorySchema&) = default;
};

class SchemaSet {
 public:
  SchemaSet() = default;
  explicit SchemaSet(std::vector<CategorySchema> categories) : categories_(std::move(categories)) {}

  const std::vector<CategorySchema>& categories() const { return categories_; }

  const CategorySchema& at(const std::string& name) const {
    for (const auto& c : categories_)
      if (c.name == name) return c;
    throw SchemaError("unknown form category '" + name + "'");
  }
  bool contains(const std::string& name) const {
    return std::any_of(categories_.begin(), categories_.end(),
                       [&](const CategorySchema& c) { return c.name == name; });
  }

  friend bool operator==(const SchemaSet&, const SchemaSet&) = default;

 private:
  std::vector<CategorySchema> categories_;
};

inline Json to_json(const CategorySchema& c) {
  Json keys = Json::object();
  for (const auto& [label, variants] : c.key_phrases) keys[label] = variants;
  Json kinds = Json::object();
  for (const auto& [label, kind] : c.kinds) kinds[label] = kind;
  return Json{{"name", c.name},
              {"title", c.title},
              {"layout_count", c.layout_count},
              {"value_types", c.value_types},
              {"kinds", kinds},
              {"key_phrases", keys},
              {"no_key_labels", c.no_key_labels},
              {"no_key_prob", c.no_key_prob},
              {"multi_span_prob", c.multi_span_prob}};
}

inline CategorySchema category_from_json(const Json& j) {
  CategorySchema c;
  c.name = j.at("name").get<std::string>();
  c.title = j.at("title").get<Phrase>();
  c.layout_count = j.at("layout_count").get<int>();
  c.value_types = j.at("value_types").get<std::vector<std::string>>();
  for (const auto& [label, kind] : j.at("kinds").items()) c.kinds[label] = kind.get<std::string>();
  for (const auto& [label, variants] : j.at("key_phrases").items())
    c.key_phrases[label] = variants.get<std::vector<Phrase>>();
  c.no_key_labels = j.at("no_key_labels").get<std::vector<std::string>>();
  c.no_key_prob = j.at("no_key_prob").get<double>();
  c.multi_span_prob = j.at("multi_span_prob").get<double>();
  if (c.layout_count < 1) throw SchemaError("category '" + c.name + "' needs at least one layout");
  if (c.value_types.empty()) throw SchemaError("category '" + c.name + "' has no value types");
  return c;
}

inline void save_schema(const SchemaSet& schemas, const std::string& path) {
  Json cats = Json::array();
  for (const auto& c : schemas.categories()) cats.push_back(to_json(c));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << Json{{"categories", cats}}.dump(1) << '\n';
}

inline SchemaSet load_schema(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open schema '" + path + "'");
  std::vector<CategorySchema> cats;
  try {
    const auto j = Json::parse(in);
    for (const auto& c : j.at("categories")) cats.push_back(category_from_json(c));
  } catch (const Json::exception& e) {
    throw ParseError("schema '" + path + "': " + e.what());
  }
  return SchemaSet(std::move(cats));
}

}  // namespace ppn
