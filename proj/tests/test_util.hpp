#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ppn/corpus.hpp"
#include "ppn/serialize.hpp"

namespace ppn::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ppn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Vocab vocab_of(const std::vector<std::string>& words) {
  Json tokens = Json::object();
  int next = Vocab::kReserved;
  for (const auto& word : words) {
    const auto w = Vocab::normalize(word);
    if (!tokens.contains(w)) tokens[w] = next++;
  }
  Json reserved = Json::object();
  for (int i = 0; i < Vocab::kReserved; ++i) reserved[std::string(Vocab::kReservedNames[i])] = i;
  return Vocab::from_json(Json{{"tokens", tokens}, {"reserved", reserved}});
}

/// Words laid out on one line, 60 units apart.
inline Document line_doc(const std::vector<std::string>& words, std::string category = "form") {
  Document d;
  d.id = "doc";
  d.form_category = std::move(category);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const int x = 10 + 60 * static_cast<int>(i);
    d.tokens.push_back({words[i], {x, 100, x + 50, 120}});
  }
  return d;
}

inline CategorySchema schema_of(const std::string& name, std::vector<std::string> types) {
  CategorySchema c;
  c.name = name;
  c.value_types = std::move(types);
  return c;
}

inline GeneratorConfig small_generator(int categories = 4, int docs = 12) {
  GeneratorConfig g;
  g.categories = categories;
  g.docs_per_category = docs;
  return g;
}

}  // namespace ppn::testing
