// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ppn/experiments.hpp"
#include "ppn/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace ppn;

namespace {

// ---- pinned tolerances and budgets -----------------------------------------

constexpr int kRoundTripDocs = 500;
constexpr double kRoundTripSeconds = 30;
constexpr double kMaskSeconds = 30;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 120;
constexpr double kRotaryTolerance = 1e-5;
constexpr double kRotarySeconds = 10;
constexpr double kLossTolerance = 1e-4;
constexpr int kOverfitDocs = 8;
constexpr int kOverfitSteps = 300;
constexpr double kOverfitSeconds = 300;
constexpr double kFewShotF1 = 0.85;
constexpr double kProtocolSeconds = 1200;
constexpr int kSpeedQuestions = 16;
constexpr int kSpeedDocs = 100;
constexpr double kSpeedRatio = 3.0;
constexpr double kSpeedReference = 6.4;
constexpr double kSpeedSeconds = 600;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// Desk-scale model and schedule shared by the learning criteria.
ModelConfig desk_model() {
  ModelConfig m;
  m.d_model = 64;
  m.n_layers = 1;
  m.n_heads = 4;
  m.d_ff = 128;
  m.d_head_score = 32;
  m.dropout = 0.2;
  return m;
}

TrainConfig desk_train() {
  TrainConfig t;
  t.learning_rate = 3e-3;
  t.epochs = 300;
  t.eval_every_steps = 100;
  return t;
}

// ---- structural criteria ---------------------------------------------------

const GeneratedCorpus& big_corpus() {
  static const GeneratedCorpus c = [] {
    GeneratorConfig g;
    g.categories = 20;
    g.docs_per_category = kRoundTripDocs / g.categories;
    return generate_corpus(g);
  }();
  return c;
}

Outcome round_trip() {
  const auto t0 = Clock::now();
  const auto& c = big_corpus();
  const auto vocab = Vocab::build(c.docs, c.schemas);
  const auto stats = corpus_stats(c.docs);
  std::vector<Prediction> preds;
  std::size_t key_mismatch = 0;
  for (const auto& d : c.docs) {
    const auto qs = build_question_set(d, c.schemas);
    std::vector<Prediction> parts;
    for (const auto& s : assemble_input(qs, d, vocab)) parts.push_back(decode(build_link_matrix(s, d, qs), s));
    auto p = merge_windows(parts);
    if (p != gold_prediction(d, qs)) ++key_mismatch;
    preds.push_back(std::move(p));
  }
  const double f1 = score_documents(c.docs, preds).f1();
  const double secs = seconds_since(t0);
  const bool kinds = stats.values > stats.keyless_values && stats.keyless_values > 0 && stats.multi_span_values > 0;
  return {f1 == 1.0 && key_mismatch == 0 && kinds && c.docs.size() >= kRoundTripDocs && secs < kRoundTripSeconds,
          std::to_string(c.docs.size()) + " docs (" + std::to_string(stats.values - stats.keyless_values) + " keyed, " +
              std::to_string(stats.keyless_values) + " keyless, " + std::to_string(stats.multi_span_values) +
              " multi-span values), F1 " + fmt(f1) + ", " + std::to_string(key_mismatch) +
              " documents with value or key mismatch, " + fmt(secs, 3) + " s"};
}

Outcome mask_soundness() {
  const auto t0 = Clock::now();
  const auto& c = big_corpus();
  const auto vocab = Vocab::build(c.docs, c.schemas);
  std::size_t violations = 0, links = 0;
  for (const auto& d : c.docs) {
    const auto qs = build_question_set(d, c.schemas);
    for (const auto& s : assemble_input(qs, d, vocab)) {
      const auto z = build_link_matrix(s, d, qs);
      const auto m = build_masks(s);
      for (std::size_t i = 0; i < z.data().size(); ++i)
        if (z.data()[i]) {
          ++links;
          violations += m.data()[i] == 0;
        }
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && links > 0 && secs < kMaskSeconds,
          std::to_string(violations) + " violations over " + std::to_string(links) + " gold links, " + fmt(secs, 3) +
              " s"};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  ModelConfig c;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 32;
  c.d_head_score = 8;
  const auto r = grad_check_tiny(c, 24, 1);
  const double secs = seconds_since(t0);
  return {r.max_rel_error < kGradTolerance && secs < kGradSeconds,
          "max relative error " + fmt(r.max_rel_error, 3) + " (" + r.worst_tensor + ") over " +
              std::to_string(r.coords_checked) + " coordinates, d_model 16, L 24, double; " + fmt(secs, 3) + " s"};
}

Outcome rotary() {
  const auto t0 = Clock::now();
  ModelConfig c;
  c.vocab_size = Vocab::kReserved + 1;
  const auto p = init_params<double>(c, 5);
  const int L = 64;
  Mat<double> h(L, c.d_model);
  for (int j = 0; j < c.d_model; ++j) h.col(j).setConstant(std::sin(0.7 * j + 0.3));
  std::vector<int> positions(L);
  for (int i = 0; i < L; ++i) positions[i] = i;
  const MaskTensor open(c.n_link_types(), L, 1);
  const auto z = score(p, c, h, open, positions);
  double worst = 0.0;
  for (int s : {1, 2, 5, 17, 40})
    for (int k = 1; k <= c.n_link_types(); ++k)
      for (int i = 0; i + s < L; ++i)
        for (int j = 0; j + s < L; ++j) worst = std::max(worst, std::abs(z(k, i, j) - z(k, i + s, j + s)));
  auto flat = c;
  flat.use_sinusoidal = false;
  const auto zf = score(p, flat, h, open, positions);
  double spread = 0.0;
  for (int k = 1; k <= c.n_link_types(); ++k)
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) spread = std::max(spread, std::abs(zf(k, i, j) - zf(k, 0, 0)));
  const double secs = seconds_since(t0);
  return {worst < kRotaryTolerance && spread < kRotaryTolerance && secs < kRotarySeconds,
          "max shift deviation " + fmt(worst, 3) + " over s in {1,2,5,17,40}; spread without rotary " + fmt(spread, 3) +
              "; " + fmt(secs, 3) + " s"};
}

Outcome circle_loss_values() {
  ScoreTensor<double> z(1, 2);
  LinkMatrix gold(1, 2, 0);
  const double empty = circle_loss(z, gold, MaskTensor(1, 2, 0));
  MaskTensor two(1, 2, 0);
  two(1, 0, 0) = two(1, 0, 1) = 1;
  gold(1, 0, 0) = 1;
  z(1, 0, 0) = 2.0;
  z(1, 0, 1) = -1.0;
  const double pn = circle_loss(z, gold, two);
  const double neg0 = circle_loss(ScoreTensor<double>(1, 1), LinkMatrix(1, 1, 0), MaskTensor(1, 1, 1));
  const bool ok = empty == 0.0 && std::abs(pn - 0.4402) <= kLossTolerance && std::abs(neg0 - 0.6931) <= kLossTolerance;
  return {ok, "empty " + fmt(empty) + ", {pos 2, neg -1} " + fmt(pn, 6) + " (want 0.4402), {neg 0} " + fmt(neg0, 6) +
                  " (want 0.6931)"};
}

// ---- learning criteria -----------------------------------------------------

Outcome overfit() {
  const auto t0 = Clock::now();
  GeneratorConfig g;
  g.categories = 2;
  g.docs_per_category = kOverfitDocs / 2;
  const auto c = generate_corpus(g);
  const auto vocab = Vocab::build(c.docs, c.schemas);
  auto m = desk_model();
  m.d_head_score = 16;
  m.dropout = 0.0;
  TrainConfig t = desk_train();
  t.max_steps = kOverfitSteps;
  t.batch_size = kOverfitDocs;
  t.eval_every_steps = 10;
  t.dev_size = kOverfitDocs;  // the dev slice is the whole training set
  const auto r = train(t, m, vocab, c.schemas, c.docs);
  const double f1 = evaluate(r.best, c.schemas, c.docs, t.delta).f1();
  const double secs = seconds_since(t0);
  return {f1 == 1.0 && r.best_step <= kOverfitSteps && secs < kOverfitSeconds,
          std::to_string(c.docs.size()) + " docs, training F1 " + fmt(f1) + " first reached at step " +
              std::to_string(r.best_step) + " of " + std::to_string(kOverfitSteps) + ", " + fmt(secs, 3) + " s"};
}

Outcome protocols() {
  const auto t0 = Clock::now();
  const auto c = generate_corpus(GeneratorConfig{});
  const auto runs = run_protocol(c, {{SplitMode::zero_shot, 0}, {SplitMode::few_shot, 10}, {SplitMode::full, 0}}, 7,
                                 desk_model(), desk_train());
  const double secs = seconds_since(t0);
  const double zero = runs[0].metrics.f1(), few = runs[1].metrics.f1(), full = runs[2].metrics.f1();
  const bool ordered = full >= few && few >= zero;
  return {few >= kFewShotF1 && zero > 0.0 && secs < kProtocolSeconds,
          "10 categories x 30 docs; F1 zero-shot " + fmt(zero) + ", 10-shot " + fmt(few) + " (need >= " +
              fmt(kFewShotF1) + "), full " + fmt(full) + "; ordering full >= few >= zero " +
              (ordered ? "holds" : "does not hold") + " (reported only); " + fmt(secs, 4) + " s"};
}

Outcome speed() {
  const auto t0 = Clock::now();
  GeneratorConfig g;
  g.categories = 1;
  g.docs_per_category = kSpeedDocs;
  g.min_types = g.max_types = kSpeedQuestions;
  const auto c = generate_corpus(g);
  Checkpoint ck;
  ck.vocab = Vocab::build(c.docs, c.schemas);
  ck.config = ModelConfig{};
  ck.config.vocab_size = ck.vocab.size();
  ck.params = init_params<float>(ck.config, 7);
  const auto r = speed_bench(ck.params, ck.config, ck.vocab, c.schemas, c.docs, kSpeedQuestions);
  const double secs = seconds_since(t0);
  return {r.report.ratio() >= kSpeedRatio && r.report.n_documents >= kSpeedDocs && secs < kSpeedSeconds,
          "Q " + std::to_string(kSpeedQuestions) + " over " + std::to_string(r.report.n_documents) +
              " docs: parallel " + fmt(r.report.parallel_wall_time) + " s, sequential " +
              fmt(r.report.sequential_wall_time) + " s, ratio " + fmt(r.report.ratio(), 3) + " (reference " +
              fmt(kSpeedReference, 2) + "); " + fmt(secs, 3) + " s"};
}

Outcome ablation() {
  const auto t0 = Clock::now();
  const auto c = generate_corpus(GeneratorConfig{});
  const auto split = make_splits(c.docs, SplitMode::few_shot, 10, 7);
  auto t = desk_train();
  t.epochs = 3;
  const auto rows = run_ablations(c, split, ablation_flags(), desk_model(), t);
  const Json rep = ablation_report(rows);
  const std::vector<std::string> want{"full", "-sin", "-key", "-QCI", "-QHI", "-QTI"};
  bool ok = rows.size() == want.size();
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ok = ok && rows[i].variant == want[i] && std::isfinite(rows[i].metrics.f1());
    ok = ok && rows[i].config.n_link_types() == (rows[i].variant == "-key" ? kValueLinkTypes : kAllLinkTypes);
    detail += rows[i].variant + " F1 " + fmt(rows[i].metrics.f1(), 3) + " (delta " +
              fmt(rep[i]["delta_f1"].get<double>(), 3) + ", " + std::to_string(rows[i].config.n_link_types()) +
              " channels); ";
  }
  return {ok, detail + fmt(seconds_since(t0), 3) + " s"};
}

// ---- determinism through the command-line tool -----------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PPN_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  return std::system(cmd.c_str());
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs every command into `root`; returns the failing command or "".
std::string run_commands(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string r = "'" + root.string() + "/";
  const std::string model = " --d-model 16 --n-layers 1 --n-heads 2 --d-ff 16 --d-head-score 8";
  const std::string sched = " --max-steps 6 --batch-size 4 --eval-every-steps 3 --dev-size 4 --learning-rate 0.003";
  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"gen", "gen --categories 4 --docs-per-category 10 --out " + r + "gen'"},
      {"split", "split --corpus " + r + "gen/corpus.jsonl' --mode few_shot --k 5 --out " + r + "split.json'"},
      {"train", "train --corpus " + r + "gen/corpus.jsonl' --split " + r + "split.json'" + model + sched + " --out " + r +
                    "train'"},
      {"eval", "eval --corpus " + r + "gen/corpus.jsonl' --checkpoint " + r + "train/model.ckpt' --split " + r +
                   "split.json' --out " + r + "eval'"},
      {"eval-protocol", "eval --corpus " + r + "gen/corpus.jsonl' --protocol zero_shot,few_shot,full --split-k 5" +
                            model + sched + " --out " + r + "protocol'"},
      {"decode", "decode --corpus " + r + "gen/corpus.jsonl' --checkpoint " + r +
                     "train/model.ckpt' --doc-id category_00-0001"},
      {"bench", "bench --questions 4 --docs 30" + model + " --out " + r + "bench'"},
      {"gradcheck", "gradcheck --out " + r + "gradcheck'"},
      {"ablate", "ablate --corpus " + r + "gen/corpus.jsonl' --split " + r + "split.json' --variants key,qci" + model +
                     sched + " --out " + r + "ablate'"},
  };
  for (const auto& [name, args] : cmds)
    if (run_cli(args, root / ("stdout_" + name + ".txt")) != 0) return name;
  return "";
}

// Wall-clock fields of the speed report and of bench stdout differ run to run.
bool timing_file(const fs::path& rel) {
  return rel == "bench/speed.json" || rel == "stdout_bench.txt";
}

Outcome determinism() {
  const auto base = fs::temp_directory_path() / "ppn_acceptance_determinism";
  const auto a = base / "a", b = base / "b";
  for (const auto& root : {a, b})
    if (auto failed = run_commands(root); !failed.empty())
      return {false, "command '" + failed + "' failed: " + file_bytes(root / ("stdout_" + failed + ".txt"))};
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    const auto other = b / rel;
    if (timing_file(rel)) {
      if (!fs::exists(other)) differing.push_back(rel.string());
      continue;
    }
    ++compared;
    // Paths differ between the two roots; normalize them before comparing.
    auto norm = [](std::string s, const std::string& root) {
      for (auto pos = s.find(root); pos != std::string::npos; pos = s.find(root, pos)) s.replace(pos, root.size(), "ROOT");
      return s;
    };
    if (!fs::exists(other) || norm(file_bytes(e.path()), a.string()) != norm(file_bytes(other), b.string()))
      differing.push_back(rel.string());
  }
  std::string detail = std::to_string(compared) + " output files identical across reruns of gen, split, train, eval, "
                       "eval --protocol, decode, bench, gradcheck, ablate (bench timings excluded)";
  if (!differing.empty()) {
    detail = "differing files:";
    for (const auto& d : differing) detail += " " + d;
  }
  return {differing.empty() && compared > 0, detail};
}

}  // namespace

int main() {
  report("round-trip oracle", round_trip);
  report("mask soundness", mask_soundness);
  report("gradient check", gradient_check);
  report("rotary shift invariance", rotary);
  report("circle loss values", circle_loss_values);
  report("overfit", overfit);
  report("few-shot analog", protocols);
  report("speed", speed);
  report("ablation plumbing", ablation);
  report("determinism", determinism);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
