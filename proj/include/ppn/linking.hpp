#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ppn/document.hpp"
#include "ppn/serialize.hpp"

namespace ppn {

/// Link type ids are fixed; channel k of every tensor holds type id k.
enum class LinkType : int {
  value_head_to_tail = 1,          // consecutive tokens inside a value span
  value_tail_to_head = 2,          // final value tail -> first value head
  question_head_to_value_head = 3,
  question_tail_to_value_tail = 4,
  value_continuation = 5,          // segment tail -> next segment head; self-loop at final tail
  key_head_to_tail = 6,            // consecutive tokens inside a key span
  key_head_to_value_head = 7,
  value_tail_to_key_tail = 8,
  question_head_to_key_head = 9,
  key_tail_to_question_tail = 10,
  key_continuation = 11,
};

inline constexpr int kAllLinkTypes = 11;
inline constexpr int kValueLinkTypes = 5;

inline constexpr int id(LinkType t) { return static_cast<int>(t); }

/// Dense binary tensor [channels, L, L]; channels are addressed by link type id (1-based).
class BinaryTensor {
 public:
  BinaryTensor() = default;
  BinaryTensor(int channels, int length, std::uint8_t fill = 0)
      : channels_(channels), length_(length),
        data_(static_cast<std::size_t>(channels) * length * length, fill) {}

  int channels() const { return channels_; }
  int length() const { return length_; }

  std::uint8_t operator()(int type_id, int i, int j) const { return data_[offset(type_id, i, j)]; }
  std::uint8_t& operator()(int type_id, int i, int j) { return data_[offset(type_id, i, j)]; }
  std::uint8_t operator()(LinkType t, int i, int j) const { return (*this)(id(t), i, j); }
  std::uint8_t& operator()(LinkType t, int i, int j) { return (*this)(id(t), i, j); }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), 1)); }

  friend bool operator==(const BinaryTensor&, const BinaryTensor&) = default;

 private:
  std::size_t offset(int type_id, int i, int j) const {
    return (static_cast<std::size_t>(type_id - 1) * length_ + i) * length_ + j;
  }
  int channels_ = 0;
  int length_ = 0;
  std::vector<std::uint8_t> data_;
};

using LinkMatrix = BinaryTensor;
using MaskTensor = BinaryTensor;

struct MaskOptions {
  int channels = kAllLinkTypes;
  bool question_context_isolation = true;
  bool question_head_isolation = true;
  bool question_tail_isolation = true;
};

namespace detail {

struct Segment {
  int head;
  int tail;
};

// Sample positions of an entity, one segment per span. Spans must occupy
// consecutive positions of the serialized context.
inline std::vector<Segment> entity_segments(const Entity& e, const std::vector<int>& position_of,
                                            const std::string& doc_id) {
  std::vector<Segment> out;
  for (const auto& span : e.spans) {
    const int head = position_of[static_cast<std::size_t>(span.start)];
    for (int t = span.start + 1; t < span.end; ++t)
      if (position_of[static_cast<std::size_t>(t)] != head + (t - span.start))
        throw InputError("document '" + doc_id + "': entity span [" + std::to_string(span.start) + "," +
                         std::to_string(span.end) + ") is not contiguous in reading order");
    out.push_back({head, head + span.size() - 1});
  }
  return out;
}

inline void link_chain(LinkMatrix& z, LinkType chain, LinkType continuation, const std::vector<Segment>& segs) {
  for (std::size_t s = 0; s < segs.size(); ++s) {
    for (int k = segs[s].head; k < segs[s].tail; ++k) z(chain, k, k + 1) = 1;
    if (s + 1 < segs.size()) z(continuation, segs[s].tail, segs[s + 1].head) = 1;
  }
  z(continuation, segs.back().tail, segs.back().tail) = 1;
}

}  // namespace detail

/// Gold relation tensor for one window. Only values whose question sits in
/// this window are linked; `question_set` is the document's full question
/// list and must cover every gold value label.
inline LinkMatrix build_link_matrix(const InputSample& sample, const Document& doc,
                                    const std::vector<std::string>& question_set,
                                    int channels = kAllLinkTypes) {
  const int L = sample.length();
  LinkMatrix z(channels, L, 0);
  std::vector<int> position_of(doc.tokens.size(), -1);
  for (std::size_t c = 0; c < sample.origin_map.size(); ++c)
    position_of[static_cast<std::size_t>(sample.origin_map[c])] = sample.context_offset + static_cast<int>(c);

  std::map<std::string, const QuestionSpan*> registry;
  for (const auto& q : sample.questions) registry[q.label] = &q;
  const std::set<std::string> covered(question_set.begin(), question_set.end());

  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    const auto& value = doc.entities[e];
    if (value.role != Role::value) continue;
    if (!covered.count(value.label))
      throw CoverageError("document '" + doc.id + "': value label '" + value.label + "' has no question");
    auto it = registry.find(value.label);
    if (it == registry.end()) continue;  // answered by another window
    const auto& q = *it->second;
    const auto vs = detail::entity_segments(value, position_of, doc.id);
    detail::link_chain(z, LinkType::value_head_to_tail, LinkType::value_continuation, vs);
    z(LinkType::value_tail_to_head, vs.back().tail, vs.front().head) = 1;
    z(LinkType::question_head_to_value_head, q.head, vs.front().head) = 1;
    z(LinkType::question_tail_to_value_tail, q.tail, vs.back().tail) = 1;

    if (channels < kAllLinkTypes) continue;
    const auto key_index = doc.key_of(static_cast<int>(e));
    if (!key_index) continue;
    const auto ks = detail::entity_segments(doc.entities[static_cast<std::size_t>(*key_index)], position_of, doc.id);
    detail::link_chain(z, LinkType::key_head_to_tail, LinkType::key_continuation, ks);
    z(LinkType::key_head_to_value_head, ks.front().head, vs.front().head) = 1;
    z(LinkType::value_tail_to_key_tail, vs.back().tail, ks.back().tail) = 1;
    z(LinkType::question_head_to_key_head, q.head, ks.front().head) = 1;
    z(LinkType::key_tail_to_question_tail, ks.back().tail, q.tail) = 1;
  }
  return z;
}

/// Score-level isolation. Cells touching special or padding positions are
/// always masked; the three flags toggle question-context and question
/// head/tail isolation.
inline MaskTensor build_masks(const InputSample& sample, const MaskOptions& opts = {}) {
  const int L = sample.length();
  MaskTensor m(opts.channels, L, 0);
  std::vector<char> special(L), context(L), head(L, 0), tail(L, 0);
  for (int p = 0; p < L; ++p) {
    special[p] = Vocab::is_special(sample.token_ids[p]);
    context[p] = sample.in_context(p) && !special[p];
  }
  for (const auto& q : sample.questions) {
    head[q.head] = 1;
    tail[q.tail] = 1;
  }
  for (int c = 1; c <= opts.channels; ++c) {
    const auto t = static_cast<LinkType>(c);
    for (int i = 0; i < L; ++i) {
      if (special[i]) continue;
      for (int j = 0; j < L; ++j) {
        if (special[j]) continue;
        bool ok = true;
        switch (t) {
          case LinkType::question_head_to_value_head:
          case LinkType::question_head_to_key_head:
            ok = !opts.question_head_isolation || (head[i] && context[j]);
            break;
          case LinkType::question_tail_to_value_tail:
            ok = !opts.question_tail_isolation || (tail[i] && context[j]);
            break;
          case LinkType::key_tail_to_question_tail:
            ok = !opts.question_tail_isolation || (context[i] && tail[j]);
            break;
          default:
            ok = !opts.question_context_isolation || (context[i] && context[j]);
        }
        m(c, i, j) = ok ? 1 : 0;
      }
    }
  }
  return m;
}

/// 1 where score >= delta; masked cells are forced to 0.
template <class ScoreTensor>
BinaryTensor binarize(const ScoreTensor& scores, const MaskTensor& mask, double delta = 0.5) {
  BinaryTensor out(mask.channels(), mask.length(), 0);
  const auto& m = mask.data();
  auto& o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (m[i] && scores[i] >= delta) ? 1 : 0;
  return out;
}

struct PredictedEntity {
  std::vector<Span> spans;
  std::optional<std::vector<Span>> key_spans;
  friend bool operator==(const PredictedEntity&, const PredictedEntity&) = default;
};

struct Prediction {
  std::string doc_id;
  std::map<std::string, std::vector<PredictedEntity>> answers;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

namespace detail {

// Follows chain links from `start`; at each segment tail either continues at a
// continuation target or closes on a self-loop. `accept_close(tail)` decides
// whether a self-loop ends the walk when a continuation also exists.
template <class AcceptClose>
std::optional<std::vector<Segment>> walk(const BinaryTensor& b, int chain, int continuation, int start,
                                         int first_context, AcceptClose accept_close) {
  const int L = b.length();
  std::vector<Segment> segs;
  std::vector<char> started(L, 0);
  int head = start;
  while (true) {
    if (started[head]) return std::nullopt;  // cycle guard
    started[head] = 1;
    int tail = head;
    while (tail + 1 < L && b(chain, tail, tail + 1)) ++tail;
    segs.push_back({head, tail});
    const bool self = b(continuation, tail, tail);
    if (self && accept_close(tail)) return segs;
    int next = -1;
    for (int h = first_context; h < L; ++h)
      if (h != tail && !started[h] && b(continuation, tail, h)) {
        next = h;
        break;
      }
    if (next < 0) return self ? std::optional<std::vector<Segment>>(segs) : std::nullopt;
    head = next;
  }
}

inline std::vector<Span> to_document_spans(const std::vector<Segment>& segs, const InputSample& s) {
  std::vector<int> idx;
  for (const auto& seg : segs)
    for (int p = seg.head; p <= seg.tail; ++p) idx.push_back(s.doc_index(p));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<Span> out;
  for (int i : idx) {
    if (!out.empty() && out.back().end == i) ++out.back().end;
    else out.push_back({i, i + 1});
  }
  return out;
}

inline bool overlaps(const std::vector<Span>& a, const std::vector<Span>& b) {
  for (const auto& x : a)
    for (const auto& y : b)
      if (x.start < y.end && y.start < x.end) return true;
  return false;
}

}  // namespace detail

/// Walks the thresholded word graph for every question of the window.
inline Prediction decode(const BinaryTensor& b, const InputSample& s) {
  Prediction pred;
  pred.doc_id = s.doc_id;
  const int L = s.length();
  const int c0 = s.context_offset;
  const bool with_keys = b.channels() >= kAllLinkTypes;
  for (const auto& q : s.questions) {
    auto& answers = pred.answers[q.label];
    for (int h = c0; h < L; ++h) {
      if (!b(LinkType::question_head_to_value_head, q.head, h)) continue;
      auto closes_here = [&](int t) { return b(LinkType::question_tail_to_value_tail, q.tail, t) != 0; };
      auto segs = detail::walk(b, id(LinkType::value_head_to_tail), id(LinkType::value_continuation), h, c0,
                               closes_here);
      if (!segs || !closes_here(segs->back().tail)) continue;
      PredictedEntity ent;
      ent.spans = detail::to_document_spans(*segs, s);
      if (std::any_of(answers.begin(), answers.end(),
                      [&](const PredictedEntity& kept) { return detail::overlaps(kept.spans, ent.spans); }))
        continue;  // heads are visited in reading order, so the earlier entity wins

      if (with_keys) {
        const int vt = segs->back().tail;
        std::vector<char> tail_ok(L, 0);
        for (int kt = c0; kt < L; ++kt)
          tail_ok[kt] = b(LinkType::value_tail_to_key_tail, vt, kt) && b(LinkType::key_tail_to_question_tail, kt, q.tail);
        for (int kh = c0; kh < L && !ent.key_spans; ++kh) {
          if (!b(LinkType::key_head_to_value_head, kh, h) || !b(LinkType::question_head_to_key_head, q.head, kh))
            continue;
          auto key_closes = [&](int t) { return tail_ok[t] != 0; };
          auto ks = detail::walk(b, id(LinkType::key_head_to_tail), id(LinkType::key_continuation), kh, c0, key_closes);
          if (ks && tail_ok[ks->back().tail]) ent.key_spans = detail::to_document_spans(*ks, s);
        }
      }
      answers.push_back(std::move(ent));
    }
  }
  return pred;
}

/// Unions per-window predictions of one document (questions never repeat across windows).
inline Prediction merge_windows(const std::vector<Prediction>& parts) {
  Prediction out;
  for (const auto& p : parts) {
    if (out.doc_id.empty()) out.doc_id = p.doc_id;
    for (const auto& [label, ents] : p.answers) {
      auto& dst = out.answers[label];
      dst.insert(dst.end(), ents.begin(), ents.end());
    }
  }
  return out;
}

/// Gold answers of a document in prediction form (every question present).
inline Prediction gold_prediction(const Document& doc, const std::vector<std::string>& questions) {
  Prediction p;
  p.doc_id = doc.id;
  for (const auto& q : questions) p.answers[q];
  for (std::size_t e = 0; e < doc.entities.size(); ++e) {
    const auto& ent = doc.entities[e];
    if (ent.role != Role::value) continue;
    PredictedEntity pe{ent.spans, std::nullopt};
    if (auto k = doc.key_of(static_cast<int>(e))) pe.key_spans = doc.entities[static_cast<std::size_t>(*k)].spans;
    p.answers[ent.label].push_back(std::move(pe));
  }
  return p;
}

inline Json to_json(const Prediction& p) {
  auto spans_json = [](const std::vector<Span>& spans) {
    Json a = Json::array();
    for (const auto& s : spans) a.push_back({s.start, s.end});
    return a;
  };
  Json answers = Json::object();
  for (const auto& [label, ents] : p.answers) {
    Json list = Json::array();
    for (const auto& e : ents)
      list.push_back({{"spans", spans_json(e.spans)},
                      {"key_spans", e.key_spans ? spans_json(*e.key_spans) : Json(nullptr)}});
    answers[label] = list;
  }
  return Json{{"doc_id", p.doc_id}, {"answers", answers}};
}

inline Prediction prediction_from_json(const Json& j) {
  auto spans_of = [](const Json& a) {
    std::vector<Span> out;
    for (const auto& s : a) out.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    return out;
  };
  Prediction p;
  p.doc_id = j.at("doc_id").get<std::string>();
  for (const auto& [label, list] : j.at("answers").items()) {
    auto& dst = p.answers[label];
    for (const auto& e : list) {
      PredictedEntity pe{spans_of(e.at("spans")), std::nullopt};
      if (!e.at("key_spans").is_null()) pe.key_spans = spans_of(e.at("key_spans"));
      dst.push_back(std::move(pe));
    }
  }
  return p;
}

}  // namespace ppn
