#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ppn/model.hpp"

namespace ppn {

/// A one-line document that fits `seq_len` positions with two one-word
/// questions: a keyed two-span value and a keyless value.
struct TinyCase {
  Document doc;
  Vocab vocab;
  std::vector<std::string> questions;
};

inline TinyCase tiny_case(int seq_len) {
  const int n = seq_len - 5;  // <s> total [T] date </s>
  if (n < 8) throw ConfigError("gradcheck needs seq_len >= 13");
  TinyCase tc;
  tc.questions = {"date", "total"};
  tc.doc.id = "tiny";
  tc.doc.form_category = "tiny";
  Json words = Json::object();
  int next = Vocab::kReserved;
  for (const std::string w : {"date", "total"}) words[w] = next++;
  for (int i = 0; i < n; ++i) {
    const std::string w = std::string("w") + static_cast<char>('a' + i % 6);
    tc.doc.tokens.push_back({w, {20 + 60 * i, 100, 70 + 60 * i, 120}});
    if (!words.contains(w)) words[w] = next++;
  }
  tc.doc.page_width = 60 * n + 40;
  tc.doc.entities = {{Role::key, "", {{0, 1}}},
                     {Role::value, "total", {{1, 3}, {4, 5}}},
                     {Role::value, "date", {{n - 3, n - 1}}}};
  tc.doc.kv_links = {{0, 1}};
  validate(tc.doc);
  Json reserved = Json::object();
  for (int i = 0; i < Vocab::kReserved; ++i) reserved[std::string(Vocab::kReservedNames[i])] = i;
  tc.vocab = Vocab::from_json(Json{{"tokens", words}, {"reserved", reserved}});
  return tc;
}

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t coords_checked = 0;
  std::map<std::string, double> per_tensor;

  Json to_json() const {
    Json per = Json::object();
    for (const auto& [k, v] : per_tensor) per[k] = v;
    return Json{{"max_rel_error", max_rel_error},
                {"worst_tensor", worst_tensor},
                {"coords_checked", coords_checked},
                {"per_tensor", per}};
  }
};

/// Relative error |a - n| / max(|a|, |n|, floor). Some gradients are exactly
/// zero (the key bias under softmax shift invariance), where central
/// differences return pure round-off; the floor turns those into an absolute
/// check at floor * tolerance.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences against the analytic gradient, in double precision.
/// Per tensor: `per_tensor` random coordinates plus up to as many more drawn
/// from coordinates with a nonzero analytic gradient.
inline GradcheckReport grad_check(const ParamSet<double>& params, const ModelConfig& c, const PreparedSample& ps,
                                  double eps = 1e-5, std::uint64_t seed = 1, std::size_t per_tensor = 12) {
  if (c.dropout != 0.0) throw ConfigError("gradcheck requires dropout = 0");
  auto grads = params.zeros_like();
  loss_and_grad(params, c, ps, grads);
  for (const auto& g : grads.tensors)
    for (double v : g.data)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in '" + g.name + "'");

  auto p = params;
  std::mt19937_64 rng(seed);
  GradcheckReport report;
  for (std::size_t t = 0; t < p.count(); ++t) {
    auto& tensor = p[t];
    const auto& g = grads[t].data;
    std::vector<std::size_t> coords;
    std::uniform_int_distribution<std::size_t> pick(0, tensor.size() - 1);
    for (std::size_t i = 0; i < per_tensor; ++i) coords.push_back(pick(rng));
    std::vector<std::size_t> nonzero;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(g[i]) > 1e-12) nonzero.push_back(i);
    std::shuffle(nonzero.begin(), nonzero.end(), rng);
    for (std::size_t i = 0; i < std::min(per_tensor, nonzero.size()); ++i) coords.push_back(nonzero[i]);

    double worst = 0.0;
    for (auto i : coords) {
      const double orig = tensor.data[i];
      tensor.data[i] = orig + eps;
      const double up = loss_only(p, c, ps);
      tensor.data[i] = orig - eps;
      const double down = loss_only(p, c, ps);
      tensor.data[i] = orig;
      const double numeric = (up - down) / (2 * eps);
      worst = std::max(worst, relative_error(g[i], numeric));
    }
    report.coords_checked += coords.size();
    report.per_tensor[tensor.name] = worst;
    if (worst >= report.max_rel_error) {
      report.max_rel_error = worst;
      report.worst_tensor = tensor.name;
    }
  }
  return report;
}

/// Builds the tiny case for `c` (vocab size is filled in) and checks it.
inline GradcheckReport grad_check_tiny(ModelConfig c, int seq_len, std::uint64_t seed, double eps = 1e-5) {
  auto tc = tiny_case(seq_len);
  c.vocab_size = tc.vocab.size();
  c.max_seq_len = std::max(c.max_seq_len, seq_len);
  auto samples = assemble_input(tc.questions, tc.doc, tc.vocab, {128, seq_len});
  auto ps = prepare(std::move(samples.at(0)), c);
  ps.gold = build_link_matrix(ps.sample, tc.doc, tc.questions, c.n_link_types());
  const auto params = init_params<double>(c, seed);
  return grad_check(params, c, ps, eps, seed);
}

}  // namespace ppn
