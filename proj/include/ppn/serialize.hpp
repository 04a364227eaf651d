#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ppn/corpus.hpp"
#include "ppn/document.hpp"
#include "ppn/reading_order.hpp"
#include "ppn/schema.hpp"

namespace ppn {

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

/// Word-level vocabulary. Ids 0..4 are reserved for the sequence-start,
/// sequence-end, question separator, padding and unknown-word markers.
class Vocab {
 public:
  static constexpr int kSos = 0;
  static constexpr int kEos = 1;
  static constexpr int kSep = 2;
  static constexpr int kPad = 3;
  static constexpr int kUnk = 4;
  static constexpr int kReserved = 5;

  static constexpr std::array<std::string_view, kReserved> kReservedNames = {"<s>", "</s>", "[T]", "<pad>",
                                                                              "<unk>"};

  Vocab() = default;

  /// Builds from training documents plus every schema label (question words).
  static Vocab build(const std::vector<Document>& train_docs, const SchemaSet& schemas) {
    std::set<std::string> words;
    for (const auto& d : train_docs)
      for (const auto& t : d.tokens) words.insert(normalize(t.text));
    for (const auto& c : schemas.categories())
      for (const auto& label : c.value_types)
        for (auto& w : split_words(label)) words.insert(normalize(w));
    Vocab v;
    int next = kReserved;
    for (const auto& w : words) v.ids_.emplace(w, next++);
    return v;
  }

  /// Digits map to '0' so numeric words share a few shapes.
  static std::string normalize(std::string_view word) {
    std::string w(word);
    for (auto& ch : w)
      if (ch >= '0' && ch <= '9') ch = '0';
    return w;
  }

  int id(std::string_view word) const {
    auto it = ids_.find(normalize(word));
    return it == ids_.end() ? kUnk : it->second;
  }
  std::vector<int> encode(std::string_view text) const {
    std::vector<int> out;
    for (const auto& w : split_words(text)) out.push_back(id(w));
    return out;
  }
  int size() const { return kReserved + static_cast<int>(ids_.size()); }
  static bool is_special(int id) { return id == kSos || id == kEos || id == kSep || id == kPad; }

  Json to_json() const {
    Json tokens = Json::object();
    for (const auto& [w, i] : ids_) tokens[w] = i;
    Json reserved = Json::object();
    for (int i = 0; i < kReserved; ++i) reserved[std::string(kReservedNames[i])] = i;
    return Json{{"tokens", tokens}, {"reserved", reserved}};
  }

  static Vocab from_json(const Json& j) {
    Vocab v;
    try {
      const auto& reserved = j.at("reserved");
      for (int i = 0; i < kReserved; ++i)
        if (reserved.at(std::string(kReservedNames[i])).get<int>() != i)
          throw ParseError("vocab reserved id mismatch for " + std::string(kReservedNames[i]));
      std::set<int> used;
      for (const auto& [w, i] : j.at("tokens").items()) {
        const int id = i.get<int>();
        if (id < kReserved || !used.insert(id).second) throw ParseError("vocab id collision at '" + w + "'");
        v.ids_.emplace(w, id);
      }
      if (!used.empty() && *used.rbegin() != kReserved + static_cast<int>(used.size()) - 1)
        throw ParseError("vocab ids are not contiguous");
    } catch (const Json::exception& e) {
      throw ParseError(std::string("vocab: ") + e.what());
    }
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << to_json().dump() << '\n';
  }
  static Vocab load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocab '" + path + "'");
    try {
      return from_json(Json::parse(in));
    } catch (const Json::exception& e) {
      throw ParseError("vocab '" + path + "': " + e.what());
    }
  }

  friend bool operator==(const Vocab&, const Vocab&) = default;

 private:
  std::map<std::string, int> ids_;
};

struct QuestionSpan {
  std::string label;
  int head = 0;
  int tail = 0;
  friend bool operator==(const QuestionSpan&, const QuestionSpan&) = default;
};

using LayoutBox = std::array<int, 4>;

/// One model input: <s> Q1 [T] Q2 ... Qn </s> followed by the whole context.
struct InputSample {
  std::string doc_id;
  int window_index = 0;
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<int> position_ids;
  std::vector<LayoutBox> layout;
  std::vector<QuestionSpan> questions;
  int context_offset = 0;
  std::vector<int> origin_map;  // context slot (position - context_offset) -> document token

  int length() const { return static_cast<int>(token_ids.size()); }
  bool in_context(int p) const { return p >= context_offset && p < length(); }
  int doc_index(int p) const { return origin_map[static_cast<std::size_t>(p - context_offset)]; }
};

struct SerializeOptions {
  int max_question_window = 128;
  int max_seq_len = 512;
};

/// Every value type defined for the document's category, sorted.
inline std::vector<std::string> build_question_set(const Document& doc, const SchemaSet& schemas) {
  const auto& cat = schemas.at(doc.form_category);
  if (cat.value_types.empty()) throw SchemaError("category '" + cat.name + "' defines no value types");
  auto labels = cat.value_types;
  std::sort(labels.begin(), labels.end());
  return labels;
}

constexpr int kCoordMax = 1000;

inline int quantize(int coord, int page_dim) {
  const double v = std::round(double(kCoordMax) * coord / std::max(1, page_dim));
  return std::clamp(static_cast<int>(v), 0, kCoordMax);
}

inline std::vector<InputSample> assemble_input(const std::vector<std::string>& questions, const Document& doc,
                                               const Vocab& vocab, const SerializeOptions& opts = {}) {
  if (questions.empty()) throw InputError("document '" + doc.id + "': empty question list");
  const auto order = reading_order(doc.tokens);
  const int context_len = static_cast<int>(order.size());
  if (context_len + 2 > opts.max_seq_len)
    throw TruncationError("document '" + doc.id + "': context of " + std::to_string(context_len) +
                          " tokens exceeds max_seq_len " + std::to_string(opts.max_seq_len));
  const int budget = std::min(opts.max_question_window, opts.max_seq_len - 1 - context_len);

  std::vector<std::vector<int>> encoded;
  for (const auto& q : questions) {
    auto ids = vocab.encode(q);
    if (ids.empty()) throw InputError("question '" + q + "' has no words");
    if (static_cast<int>(ids.size()) + 1 > budget)
      throw InputError("document '" + doc.id + "': question '" + q + "' does not fit a window of " +
                       std::to_string(budget) + " tokens");
    encoded.push_back(std::move(ids));
  }

  // Greedy in-order packing; each question costs its words plus one separator.
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  std::size_t begin = 0;
  int used = 0;
  for (std::size_t q = 0; q < encoded.size(); ++q) {
    const int cost = static_cast<int>(encoded[q].size()) + 1;
    if (used + cost > budget) {
      windows.emplace_back(begin, q);
      begin = q;
      used = 0;
    }
    used += cost;
  }
  windows.emplace_back(begin, encoded.size());

  std::vector<InputSample> out;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    InputSample s;
    s.doc_id = doc.id;
    s.window_index = static_cast<int>(w);
    auto push = [&](int id, int segment, LayoutBox box) {
      s.token_ids.push_back(id);
      s.segment_ids.push_back(segment);
      s.position_ids.push_back(static_cast<int>(s.position_ids.size()));
      s.layout.push_back(box);
    };
    push(Vocab::kSos, 0, {0, 0, 0, 0});
    for (std::size_t q = windows[w].first; q < windows[w].second; ++q) {
      if (q != windows[w].first) push(Vocab::kSep, 0, {0, 0, 0, 0});
      const int head = s.length();
      for (int id : encoded[q]) push(id, 0, {0, 0, 0, 0});
      s.questions.push_back({questions[q], head, s.length() - 1});
    }
    push(Vocab::kEos, 0, {0, 0, 0, 0});
    s.context_offset = s.length();
    for (auto idx : order) {
      const auto& t = doc.tokens[idx];
      push(vocab.id(t.text), 1,
           {quantize(t.bbox.x1, doc.page_width), quantize(t.bbox.y1, doc.page_height),
            quantize(t.bbox.x2, doc.page_width), quantize(t.bbox.y2, doc.page_height)});
      s.origin_map.push_back(static_cast<int>(idx));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Convenience: all windows for a document using its category's question set.
inline std::vector<InputSample> samples_for(const Document& doc, const SchemaSet& schemas, const Vocab& vocab,
                                            const SerializeOptions& opts = {}) {
  return assemble_input(build_question_set(doc, schemas), doc, vocab, opts);
}

}  // namespace ppn
