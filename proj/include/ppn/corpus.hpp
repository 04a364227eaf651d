#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ppn/document.hpp"
#include "ppn/reading_order.hpp"
#include "ppn/schema.hpp"

namespace ppn {

struct GeneratorConfig {
  int categories = 10;
  int layouts_per_category = 3;
  int docs_per_category = 30;
  int min_types = 6;
  int max_types = 10;
  double no_key_ratio = 0.305;
  double multi_span_prob = 0.15;
  double absent_prob = 0.1;
  std::uint64_t seed = 7;
};

struct GeneratedCorpus {
  SchemaSet schemas;
  std::vector<Document> docs;
};

namespace detail {

using Rng = std::mt19937_64;

inline Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0x9e37u};
  return Rng(seq);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}
inline bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }
template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(v.size()) - 1))];
}

struct ValueTypeDef {
  std::string label;
  std::string kind;
  std::vector<Phrase> keys;
};

// Global pool of value types; each category draws a subset.
inline const std::vector<ValueTypeDef>& value_type_pool() {
  static const std::vector<ValueTypeDef> pool = {
      {"name", "person", {{"name"}, {"full", "name"}}},
      {"legal representative", "person", {{"legal", "representative"}, {"legal", "person"}}},
      {"payee", "person", {{"payee"}, {"received", "by"}}},
      {"plaintiff", "person", {{"plaintiff"}, {"claimant"}}},
      {"defendant", "person", {{"defendant"}, {"respondent"}}},
      {"holder name", "person", {{"holder"}, {"holder", "name"}}},
      {"work unit", "org", {{"work", "unit"}, {"employer"}}},
      {"issuing authority", "org", {{"issuing", "authority"}, {"issued", "by"}}},
      {"seller name", "org", {{"seller"}, {"seller", "name"}}},
      {"buyer name", "org", {{"buyer"}, {"purchaser"}}},
      {"court", "org", {{"court"}, {"trial", "court"}}},
      {"bank name", "org", {{"bank"}, {"opening", "bank"}}},
      {"address", "address", {{"address"}, {"current", "address"}}},
      {"domicile", "address", {{"domicile"}, {"residence"}}},
      {"seller address", "address", {{"seller", "address"}, {"seller", "location"}}},
      {"buyer address", "address", {{"buyer", "address"}, {"buyer", "location"}}},
      {"issue date", "date", {{"issue", "date"}, {"date", "of", "issue"}}},
      {"birth date", "date", {{"date", "of", "birth"}, {"born"}}},
      {"valid until", "date", {{"valid", "until"}, {"expiry", "date"}}},
      {"filing date", "date", {{"filing", "date"}, {"filed", "on"}}},
      {"total amount", "amount", {{"total"}, {"total", "amount"}, {"amount", "in", "total"}}},
      {"tax amount", "amount", {{"tax", "amount"}, {"tax", "payable"}}},
      {"registered capital", "amount", {{"registered", "capital"}, {"capital"}}},
      {"claim amount", "amount", {{"claim"}, {"amount", "claimed"}}},
      {"invoice number", "code", {{"invoice", "no."}, {"invoice", "code"}}},
      {"certificate number", "code", {{"certificate", "no."}, {"cert", "no."}}},
      {"tax id", "code", {{"tax", "id"}, {"taxpayer", "id"}}},
      {"case number", "code", {{"case", "no."}, {"docket"}}},
      {"phone", "phone", {{"phone"}, {"tel"}, {"telephone"}}},
      {"seller phone", "phone", {{"seller", "tel"}, {"seller", "phone"}}},
      {"quantity", "quantity", {{"quantity"}, {"qty"}}},
      {"goods name", "goods", {{"goods"}, {"item", "name"}}},
      {"gender", "gender", {{"gender"}, {"sex"}}},
      {"nation", "nation", {{"nation"}, {"ethnicity"}}},
      {"tax rate", "rate", {{"tax", "rate"}, {"rate"}}},
      {"case cause", "cause", {{"cause", "of", "action"}, {"case", "type"}}},
      {"account number", "account", {{"account"}, {"account", "no."}}},
      {"payer account", "account", {{"payer", "account"}, {"debit", "account"}}},
      {"business term", "term", {{"business", "term"}, {"operating", "period"}}},
      {"loan term", "term", {{"loan", "term"}, {"term"}}},
  };
  return pool;
}

inline const std::vector<Phrase>& title_pool() {
  static const std::vector<Phrase> pool = {
      {"vat", "invoice"},          {"business", "license"},  {"civil", "judgment"},
      {"identity", "card"},        {"patent", "certificate"}, {"software", "copyright"},
      {"bank", "receipt"},         {"tax", "certificate"},   {"purchase", "contract"},
      {"court", "summons"},        {"loan", "agreement"},    {"employment", "record"},
      {"payment", "voucher"},      {"shipping", "bill"},     {"quality", "certificate"},
      {"rental", "contract"},
  };
  return pool;
}

inline const std::vector<Phrase>& noise_pool() {
  static const std::vector<Phrase> pool = {{"seal"},   {"signature"}, {"remarks"},       {"copy"},
                                           {"stamp", "here"}, {"page", "1"}, {"original"}, {"void"}};
  return pool;
}

inline const std::vector<Phrase>& implicit_prefix_pool() {
  static const std::vector<Phrase> pool = {{"hereby"}, {"note"}, {"see"}, {"as", "follows"}, {"stated"}};
  return pool;
}

inline std::string two_digit(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

inline Phrase render_content(const std::string& kind, Rng& rng) {
  static const std::vector<std::string> given = {"Lei", "Wei", "Fang", "Min", "Jing", "Qiang", "Yan",
                                                 "Jun", "Hua", "Ping", "Hong", "Xiu", "Ying", "Tao",
                                                 "Bo", "Hui", "Kai", "Lan", "Ming", "Ning", "Rui",
                                                 "Shan", "Ting", "Xin", "Zhen", "Feng", "Gang", "Yu"};
  static const std::vector<std::string> family = {"Wang", "Li",  "Zhang", "Liu", "Chen", "Yang", "Zhao",
                                                  "Huang", "Zhou", "Wu", "Xu",   "Sun",  "Hu",   "Zhu",
                                                  "Gao",  "Lin",  "He",  "Guo",  "Ma",   "Luo"};
  static const std::vector<std::string> places = {"Changsha", "Hunan",   "Beijing", "Shanghai", "Wuhan",
                                                  "Nanjing",  "Hangzhou", "Chengdu", "Xiamen",  "Suzhou"};
  static const std::vector<Phrase> domains = {{"Natural", "Resources"}, {"Public", "Security"}, {"Taxation"},
                                              {"Commerce"}, {"Technology"}, {"Trading"}, {"Logistics"},
                                              {"Construction"}, {"Pharmaceutical"}, {"Textile"}};
  static const std::vector<Phrase> suffixes = {{"Bureau"}, {"Company"}, {"Co.", "Ltd"}, {"Group"}, {"Office"}};
  static const std::vector<std::string> roads = {"Jiefang", "Renmin", "Zhongshan", "Huangxing",
                                                 "Wuyi",    "Xiangjiang", "Furong", "Shaoshan"};
  static const std::vector<std::string> road_kinds = {"Road", "Street", "Avenue"};
  static const std::vector<std::string> months = {"January", "February", "March",     "April",   "May",      "June",
                                                  "July",    "August",   "September", "October", "November", "December"};
  static const std::vector<std::string> units = {"pieces", "tons", "boxes", "sets", "kg"};
  static const std::vector<Phrase> goods = {{"steel", "pipe"}, {"office", "chair"}, {"cement"}, {"copper", "wire"},
                                            {"printing", "paper"}, {"diesel", "fuel"}, {"rice"}, {"glass", "panel"}};
  static const std::vector<std::string> nations = {"Han", "Hui", "Miao", "Tujia", "Zhuang", "Yao", "Uygur"};
  static const std::vector<std::string> rates = {"3%", "6%", "9%", "13%", "17%"};
  static const std::vector<Phrase> causes = {{"contract", "dispute"}, {"labor", "dispute"}, {"loan", "dispute"},
                                             {"property", "dispute"}, {"tort", "liability"}};
  static const std::vector<std::string> code_prefix = {"HX", "CN", "GB", "TX", "ZJ", "HN"};

  Phrase out;
  auto append = [&](const Phrase& p) { out.insert(out.end(), p.begin(), p.end()); };
  if (kind == "person") {
    out = {pick(rng, family), pick(rng, given)};
    if (chance(rng, 0.3)) out.push_back(pick(rng, given));
  } else if (kind == "org") {
    out = {pick(rng, places)};
    append(pick(rng, domains));
    append(pick(rng, suffixes));
  } else if (kind == "address") {
    out = {"No.", std::to_string(uniform_int(rng, 1, 120)), pick(rng, roads), pick(rng, road_kinds)};
    if (chance(rng, 0.5)) out.push_back(pick(rng, places));
  } else if (kind == "date") {
    out = {pick(rng, months), std::to_string(uniform_int(rng, 1, 28)), std::to_string(uniform_int(rng, 2000, 2024))};
  } else if (kind == "amount") {
    out = {"CNY", std::to_string(uniform_int(rng, 1, 150) * 50) + ".00"};
  } else if (kind == "code") {
    out = {pick(rng, code_prefix) + std::to_string(1000 + 37 * uniform_int(rng, 0, 40))};
  } else if (kind == "phone") {
    out = {"0" + std::to_string(uniform_int(rng, 710, 718)), std::to_string(5000 + 83 * uniform_int(rng, 0, 50))};
  } else if (kind == "quantity") {
    out = {std::to_string(uniform_int(rng, 1, 60)), pick(rng, units)};
  } else if (kind == "goods") {
    out = pick(rng, goods);
  } else if (kind == "gender") {
    out = {chance(rng, 0.5) ? "male" : "female"};
  } else if (kind == "nation") {
    out = {pick(rng, nations)};
  } else if (kind == "rate") {
    out = {pick(rng, rates)};
  } else if (kind == "cause") {
    out = pick(rng, causes);
  } else if (kind == "account") {
    out = {"6222", std::to_string(3000 + 71 * uniform_int(rng, 0, 60)), std::to_string(1000 + 97 * uniform_int(rng, 0, 60))};
  } else if (kind == "term") {
    out = {std::to_string(uniform_int(rng, 1, 30)), chance(rng, 0.5) ? "years" : "months"};
  } else {
    throw SchemaError("no content generator for kind '" + kind + "'");
  }
  return out;
}

struct Slot {
  std::string label;
  bool stacked = false;
};
struct Row {
  std::vector<Slot> slots;  // one or two columns
};
struct LayoutTemplate {
  std::vector<Row> rows;
  std::vector<std::string> table;  // labels rendered as a header/value table
  std::size_t table_after = 0;     // row index the table follows
  std::map<std::string, std::size_t> key_variant;
  bool footer = false;
};

inline LayoutTemplate make_template(const CategorySchema& cat, Rng& rng) {
  LayoutTemplate t;
  std::vector<std::string> labels = cat.value_types;
  std::shuffle(labels.begin(), labels.end(), rng);
  for (const auto& l : labels)
    t.key_variant[l] = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(cat.key_phrases.at(l).size()) - 1));
  std::size_t next = 0;
  if (labels.size() >= 5 && chance(rng, 0.5)) {
    const int n = uniform_int(rng, 2, 3);
    t.table.assign(labels.begin(), labels.begin() + n);
    next = static_cast<std::size_t>(n);
  }
  while (next < labels.size()) {
    Row row;
    const int cols = (labels.size() - next >= 2 && chance(rng, 0.6)) ? 2 : 1;
    for (int c = 0; c < cols; ++c) row.slots.push_back({labels[next++], chance(rng, 0.3)});
    t.rows.push_back(std::move(row));
  }
  t.table_after = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(t.rows.size())));
  t.footer = chance(rng, 0.5);
  return t;
}

// A run of words placed left-to-right starting at x on one line.
struct Piece {
  Phrase words;
  int x = 0;
  int entity = -1;
};
using Line = std::vector<Piece>;

struct EntityDraft {
  Role role;
  std::string label;
};

constexpr int kCharWidth = 7;
constexpr int kWordGap = 8;
constexpr int kPageSize = 1000;

inline int word_width(const std::string& w) { return std::max(10, kCharWidth * static_cast<int>(w.size()) + 4); }
inline int phrase_width(const Phrase& p) {
  int w = 0;
  for (const auto& s : p) w += word_width(s) + kWordGap;
  return w - kWordGap;
}

class DocBuilder {
 public:
  DocBuilder(const CategorySchema& cat, Rng& rng) : cat_(cat), rng_(rng) {}

  void render(const LayoutTemplate& t, const std::vector<std::string>& present) {
    present_ = std::set<std::string>(present.begin(), present.end());
    // title
    lines_.push_back({Piece{cat_.title, 300 + uniform_int(rng_, -20, 20), -1}});
    for (std::size_t r = 0; r <= t.rows.size(); ++r) {
      if (!t.table.empty() && r == t.table_after) render_table(t);
      if (r < t.rows.size()) render_row(t, t.rows[r]);
    }
    if (t.footer) lines_.push_back({Piece{pick(rng_, noise_pool()), 40 + uniform_int(rng_, 0, 400), -1}});
  }

  Document finish(std::string id) {
    std::erase_if(lines_, [](const Line& l) { return l.empty(); });
    const int n_lines = static_cast<int>(lines_.size());
    const int pitch = std::min(28, (kPageSize - 60) / std::max(1, n_lines));
    const int height = std::max(6, pitch * 2 / 3);
    const int jitter = height / 8;

    std::vector<Token> raw;
    std::vector<int> raw_entity;
    for (int li = 0; li < n_lines; ++li) {
      const int base = 30 + li * pitch;
      // Lay pieces left to right, pushing later pieces past earlier ones.
      struct Placed {
        std::string text;
        int x1, x2, entity;
      };
      std::vector<Placed> placed;
      int cursor = 0;
      for (const auto& piece : lines_[li]) {
        int x = std::max(piece.x, placed.empty() ? 0 : cursor + 24);
        for (const auto& w : piece.words) {
          const int wd = word_width(w);
          placed.push_back({w, x, x + wd, piece.entity});
          x += wd + kWordGap;
        }
        cursor = placed.back().x2;
      }
      const int right = placed.empty() ? 0 : placed.back().x2;
      const double scale = right > kPageSize - 10 ? double(kPageSize - 10) / right : 1.0;
      for (const auto& p : placed) {
        const int dy = uniform_int(rng_, -jitter, jitter);
        BBox b{static_cast<int>(p.x1 * scale), base + dy, static_cast<int>(p.x2 * scale), base + dy + height};
        b.x2 = std::max(b.x2, b.x1 + 1);
        raw.push_back({p.text, b});
        raw_entity.push_back(p.entity);
      }
    }

    const auto order = reading_order(raw);
    Document doc;
    doc.id = std::move(id);
    doc.form_category = cat_.name;
    doc.page_width = kPageSize;
    doc.page_height = kPageSize;
    std::vector<std::vector<int>> positions(drafts_.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      doc.tokens.push_back(raw[order[pos]]);
      const int e = raw_entity[order[pos]];
      if (e >= 0) positions[e].push_back(static_cast<int>(pos));
    }
    for (std::size_t e = 0; e < drafts_.size(); ++e) {
      Entity ent{drafts_[e].role, drafts_[e].label, {}};
      for (int p : positions[e]) {
        if (!ent.spans.empty() && ent.spans.back().end == p) ++ent.spans.back().end;
        else ent.spans.push_back({p, p + 1});
      }
      doc.entities.push_back(std::move(ent));
    }
    for (const auto& [k, v] : links_) doc.kv_links.push_back({k, v});
    return doc;
  }

  // Values that may be rendered without their key are decided up front.
  void set_no_key(std::set<std::string> no_key) { no_key_ = std::move(no_key); }

 private:
  int add_entity(Role role, const std::string& label) {
    drafts_.push_back({role, role == Role::key ? std::string{} : label});
    return static_cast<int>(drafts_.size()) - 1;
  }

  // Places `words` on `line`; when folding, the trailing words go to `cont`.
  void place(Line& line, Line& cont, Phrase words, int x, int entity, bool may_fold) {
    if (may_fold && words.size() >= 2 && chance(rng_, cat_.multi_span_prob)) {
      const std::size_t tail = std::max<std::size_t>(1, words.size() / 3);
      Phrase rest(words.end() - static_cast<long>(tail), words.end());
      words.resize(words.size() - tail);
      cont.push_back({rest, x, entity});
    }
    line.push_back({std::move(words), x, entity});
  }

  void render_row(const LayoutTemplate& t, const Row& row) {
    Line a, a_cont, b, b_cont;
    for (std::size_t c = 0; c < row.slots.size(); ++c) {
      const auto& slot = row.slots[c];
      if (!present_.count(slot.label)) continue;
      const int x0 = (c == 0 ? 40 : 520) + uniform_int(rng_, -6, 6);
      const bool keyed = !no_key_.count(slot.label);
      const auto value_words = render_content(cat_.kinds.at(slot.label), rng_);
      if (keyed) {
        const auto& key_words = cat_.key_phrases.at(slot.label)[t.key_variant.at(slot.label)];
        const int k = add_entity(Role::key, slot.label);
        const int v = add_entity(Role::value, slot.label);
        links_.emplace_back(k, v);
        if (slot.stacked) {
          place(a, a_cont, key_words, x0, k, true);
          place(b, b_cont, value_words, x0, v, true);
        } else {
          place(a, a_cont, key_words, x0, k, false);
          place(a, a_cont, value_words, x0 + phrase_width(key_words) + 16, v, true);
        }
      } else {
        Line& target = slot.stacked ? b : a;
        Line& target_cont = slot.stacked ? b_cont : a_cont;
        int x = x0;
        if (chance(rng_, 0.3)) {
          const auto& prefix = pick(rng_, implicit_prefix_pool());
          target.push_back({prefix, x, -1});
          x += phrase_width(prefix) + 16;
        }
        const int v = add_entity(Role::value, slot.label);
        place(target, target_cont, value_words, x, v, true);
      }
    }
    for (auto* l : {&a, &a_cont, &b, &b_cont}) lines_.push_back(std::move(*l));
  }

  void render_table(const LayoutTemplate& t) {
    Line head, head_cont, vals, vals_cont;
    for (std::size_t c = 0; c < t.table.size(); ++c) {
      const auto& label = t.table[c];
      if (!present_.count(label)) continue;
      const int x0 = 40 + static_cast<int>(c) * 310 + uniform_int(rng_, -5, 5);
      const auto value_words = render_content(cat_.kinds.at(label), rng_);
      if (!no_key_.count(label)) {
        const auto& key_words = cat_.key_phrases.at(label)[t.key_variant.at(label)];
        const int k = add_entity(Role::key, label);
        const int v = add_entity(Role::value, label);
        links_.emplace_back(k, v);
        place(head, head_cont, key_words, x0, k, true);
        place(vals, vals_cont, value_words, x0, v, true);
      } else {
        const int v = add_entity(Role::value, label);
        place(vals, vals_cont, value_words, x0, v, true);
      }
    }
    for (auto* l : {&head, &head_cont, &vals, &vals_cont}) lines_.push_back(std::move(*l));
  }

  const CategorySchema& cat_;
  Rng& rng_;
  std::set<std::string> present_;
  std::set<std::string> no_key_;
  std::vector<Line> lines_;
  std::vector<EntityDraft> drafts_;
  std::vector<std::pair<int, int>> links_;
};

inline std::string category_name(int index) { return "category_" + two_digit(index); }

}  // namespace detail

inline void validate(const GeneratorConfig& cfg) {
  if (cfg.categories < 1) throw ConfigError("categories must be >= 1");
  if (cfg.docs_per_category < 1) throw ConfigError("docs_per_category must be >= 1");
  if (cfg.layouts_per_category < 1) throw ConfigError("layouts_per_category must be >= 1");
  const int pool = static_cast<int>(detail::value_type_pool().size());
  if (cfg.min_types < 1 || cfg.max_types < cfg.min_types || cfg.max_types > pool)
    throw ConfigError("types per category must satisfy 1 <= min <= max <= " + std::to_string(pool));
  for (double p : {cfg.no_key_ratio, cfg.multi_span_prob, cfg.absent_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probabilities must lie in [0, 1]");
}

/// Draws a category schema: a random subset of the value-type pool, a key
/// phrasing for each, and the labels allowed to appear without a key (at most
/// one per content kind, so an unkeyed value stays identifiable by content).
inline CategorySchema make_category(const GeneratorConfig& cfg, int index) {
  auto rng = detail::derive_rng(cfg.seed, 1, static_cast<std::uint64_t>(index));
  const auto& pool = detail::value_type_pool();
  CategorySchema cat;
  cat.name = detail::category_name(index);
  cat.title = detail::title_pool()[static_cast<std::size_t>(index) % detail::title_pool().size()];
  cat.layout_count = cfg.layouts_per_category;
  cat.multi_span_prob = cfg.multi_span_prob;

  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int n_types = detail::uniform_int(rng, cfg.min_types, cfg.max_types);
  std::set<std::string> kinds_taken;
  for (int i = 0; i < n_types; ++i) {
    const auto& def = pool[idx[static_cast<std::size_t>(i)]];
    cat.value_types.push_back(def.label);
    cat.kinds[def.label] = def.kind;
    std::vector<Phrase> variants = def.keys;
    std::shuffle(variants.begin(), variants.end(), rng);
    variants.resize(std::min<std::size_t>(variants.size(), 2));
    cat.key_phrases[def.label] = variants;
    if (kinds_taken.insert(def.kind).second) cat.no_key_labels.push_back(def.label);
  }
  std::sort(cat.value_types.begin(), cat.value_types.end());
  std::sort(cat.no_key_labels.begin(), cat.no_key_labels.end());
  const double eligible = static_cast<double>(cat.no_key_labels.size());
  cat.no_key_prob = std::min(0.95, cfg.no_key_ratio * n_types / eligible);
  return cat;
}

inline Document generate_document(const CategorySchema& cat, const std::vector<detail::LayoutTemplate>& layouts,
                                  const GeneratorConfig& cfg, int cat_index, int doc_index) {
  auto rng = detail::derive_rng(cfg.seed, 2 + static_cast<std::uint64_t>(cat_index),
                                static_cast<std::uint64_t>(doc_index));
  const auto& layout = detail::pick(rng, layouts);
  std::vector<std::string> present;
  for (const auto& l : cat.value_types)
    if (!detail::chance(rng, cfg.absent_prob)) present.push_back(l);
  if (present.empty()) present.push_back(cat.value_types.front());
  std::set<std::string> no_key;
  for (const auto& l : cat.no_key_labels)
    if (detail::chance(rng, cat.no_key_prob)) no_key.insert(l);

  detail::DocBuilder builder(cat, rng);
  builder.set_no_key(no_key);
  builder.render(layout, present);
  std::string number = std::to_string(doc_index);
  number.insert(0, number.size() < 4 ? 4 - number.size() : 0, '0');
  auto doc = builder.finish(cat.name + "-" + number);
  validate(doc);
  return doc;
}

/// Deterministic in (config, seed): every random draw comes from an RNG
/// derived from the seed and the category/document index.
inline GeneratedCorpus generate_corpus(const GeneratorConfig& cfg) {
  validate(cfg);
  std::vector<CategorySchema> cats;
  GeneratedCorpus out;
  for (int c = 0; c < cfg.categories; ++c) cats.push_back(make_category(cfg, c));
  for (int c = 0; c < cfg.categories; ++c) {
    auto rng = detail::derive_rng(cfg.seed, 1000, static_cast<std::uint64_t>(c));
    std::vector<detail::LayoutTemplate> layouts;
    for (int l = 0; l < cfg.layouts_per_category; ++l) layouts.push_back(detail::make_template(cats[c], rng));
    for (int d = 0; d < cfg.docs_per_category; ++d)
      out.docs.push_back(generate_document(cats[c], layouts, cfg, c, d));
  }
  out.schemas = SchemaSet(std::move(cats));
  return out;
}

struct CorpusStats {
  std::size_t documents = 0;
  std::size_t entities = 0;
  std::size_t values = 0;
  std::size_t keyless_values = 0;
  std::size_t multi_span_values = 0;
  std::size_t multi_span_keys = 0;
  double no_key_ratio() const { return values ? double(keyless_values) / double(values) : 0.0; }
};

inline CorpusStats corpus_stats(const std::vector<Document>& docs) {
  CorpusStats s;
  s.documents = docs.size();
  for (const auto& d : docs) {
    s.entities += d.entities.size();
    for (std::size_t e = 0; e < d.entities.size(); ++e) {
      const auto& ent = d.entities[e];
      if (ent.role == Role::value) {
        ++s.values;
        if (!d.key_of(static_cast<int>(e))) ++s.keyless_values;
        if (ent.spans.size() > 1) ++s.multi_span_values;
      } else if (ent.spans.size() > 1) {
        ++s.multi_span_keys;
      }
    }
  }
  return s;
}

// ---- splits ----------------------------------------------------------------

enum class SplitMode { zero_shot, few_shot, full };

inline std::string to_string(SplitMode m) {
  switch (m) {
    case SplitMode::zero_shot: return "zero_shot";
    case SplitMode::few_shot: return "few_shot";
    case SplitMode::full: return "full";
  }
  return "?";
}

inline SplitMode parse_split_mode(const std::string& s) {
  if (s == "zero_shot") return SplitMode::zero_shot;
  if (s == "few_shot") return SplitMode::few_shot;
  if (s == "full") return SplitMode::full;
  throw ConfigError("unknown split mode '" + s + "' (expected zero_shot, few_shot or full)");
}

struct SplitSpec {
  SplitMode mode = SplitMode::zero_shot;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

namespace detail {

inline std::map<std::string, std::vector<std::string>> ids_by_category(const std::vector<Document>& docs) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& d : docs) out[d.form_category].push_back(d.id);
  for (auto& [_, ids] : out) std::sort(ids.begin(), ids.end());
  return out;
}

// Categories in name order are assigned greedily so the train share of
// documents stays closest to 70%.
inline std::pair<std::vector<std::string>, std::vector<std::string>> partition_categories(
    const std::map<std::string, std::vector<std::string>>& by_cat) {
  std::vector<std::string> names;
  std::size_t total = 0;
  for (const auto& [name, ids] : by_cat) {
    names.push_back(name);
    total += ids.size();
  }
  const double target = 0.7 * static_cast<double>(total);
  double train = 0;
  std::vector<std::string> train_cats, test_cats;
  for (const auto& name : names) {
    const double n = static_cast<double>(by_cat.at(name).size());
    if (std::abs(train + n - target) < std::abs(train - target)) {
      train += n;
      train_cats.push_back(name);
    } else {
      test_cats.push_back(name);
    }
  }
  if (train_cats.empty() || test_cats.empty())
    throw SplitError("cannot partition " + std::to_string(names.size()) +
                     " categories into disjoint train and test sides");
  std::sort(train_cats.begin(), train_cats.end());
  std::sort(test_cats.begin(), test_cats.end());
  return {train_cats, test_cats};
}

}  // namespace detail

inline SplitSpec make_splits(const std::vector<Document>& docs, SplitMode mode, int k, std::uint64_t seed) {
  SplitSpec spec;
  spec.mode = mode;
  spec.seed = seed;
  spec.k = mode == SplitMode::few_shot ? k : 0;
  if (mode == SplitMode::few_shot && k != 1 && k != 5 && k != 10)
    throw SplitError("few-shot k must be 1, 5 or 10 (got " + std::to_string(k) + ")");
  if (docs.size() < 2) throw SplitError("need at least two documents to split");

  if (mode == SplitMode::full) {
    std::vector<std::string> ids;
    for (const auto& d : docs) ids.push_back(d.id);
    std::sort(ids.begin(), ids.end());
    auto rng = detail::derive_rng(seed, 78);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(ids.size())));
    spec.train_ids.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
    spec.test_ids.assign(ids.begin() + static_cast<long>(n_train), ids.end());
  } else {
    const auto by_cat = detail::ids_by_category(docs);
    const auto [train_cats, test_cats] = detail::partition_categories(by_cat);
    for (const auto& c : train_cats)
      spec.train_ids.insert(spec.train_ids.end(), by_cat.at(c).begin(), by_cat.at(c).end());
    for (const auto& c : test_cats) {
      auto ids = by_cat.at(c);
      std::size_t moved = 0;
      if (mode == SplitMode::few_shot) {
        if (static_cast<std::size_t>(k) > ids.size())
          throw SplitError("category '" + c + "' has " + std::to_string(ids.size()) +
                           " documents, fewer than k=" + std::to_string(k));
        // Same per-category order for every k, so smaller k moves a prefix.
        auto rng = detail::derive_rng(seed, 79, std::hash<std::string>{}(c));
        std::shuffle(ids.begin(), ids.end(), rng);
        moved = static_cast<std::size_t>(k);
      }
      spec.train_ids.insert(spec.train_ids.end(), ids.begin(), ids.begin() + static_cast<long>(moved));
      spec.test_ids.insert(spec.test_ids.end(), ids.begin() + static_cast<long>(moved), ids.end());
    }
  }
  std::sort(spec.train_ids.begin(), spec.train_ids.end());
  std::sort(spec.test_ids.begin(), spec.test_ids.end());
  return spec;
}

inline Json to_json(const SplitSpec& s) {
  return Json{{"mode", to_string(s.mode)},
              {"k", s.mode == SplitMode::few_shot ? Json(s.k) : Json(nullptr)},
              {"seed", s.seed},
              {"train_ids", s.train_ids},
              {"test_ids", s.test_ids}};
}

inline SplitSpec split_from_json(const Json& j) {
  SplitSpec s;
  try {
    s.mode = parse_split_mode(j.at("mode").get<std::string>());
    s.k = j.at("k").is_null() ? 0 : j.at("k").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("split file: ") + e.what());
  }
  return s;
}

inline void save_split(const SplitSpec& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json(s).dump() << '\n';
}

inline SplitSpec load_split(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open split '" + path + "'");
  try {
    return split_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw ParseError("split '" + path + "': " + e.what());
  }
}

/// Documents whose ids are listed, in list order; unknown ids are an input error.
inline std::vector<Document> select_documents(const std::vector<Document>& docs, const std::vector<std::string>& ids) {
  std::map<std::string, const Document*> index;
  for (const auto& d : docs) index[d.id] = &d;
  std::vector<Document> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw InputError("split references unknown document '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace ppn
