// Command-line front end: gen, split, train, eval, decode, bench, gradcheck, ablate.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ppn/experiments.hpp"
#include "ppn/gradcheck.hpp"

namespace fs = std::filesystem;
using ppn::Json;

namespace {

// ---- run configuration -----------------------------------------------------

Json default_config() {
  const ppn::GeneratorConfig g;
  const ppn::ModelConfig m;
  Json train = ppn::TrainConfig{}.to_json();
  train.erase("delta");
  return Json{
      {"generator",
       {{"categories", g.categories},
        {"layouts_per_category", g.layouts_per_category},
        {"docs_per_category", g.docs_per_category},
        {"min_types", g.min_types},
        {"max_types", g.max_types},
        {"no_key_ratio", g.no_key_ratio},
        {"multi_span_prob", g.multi_span_prob},
        {"absent_prob", g.absent_prob},
        {"seed", g.seed}}},
      {"split", {{"mode", "few_shot"}, {"k", 10}, {"seed", 7}}},
      {"model",
       {{"d_model", m.d_model},
        {"n_layers", m.n_layers},
        {"n_heads", m.n_heads},
        {"d_ff", m.d_ff},
        {"d_head_score", m.d_head_score},
        {"max_seq_len", m.max_seq_len},
        {"max_question_window", m.max_question_window},
        {"layout_buckets", m.layout_buckets},
        {"dropout", m.dropout},
        {"use_sinusoidal", m.use_sinusoidal},
        {"use_key_channels", m.use_key_channels},
        {"use_qci", m.use_qci},
        {"use_qhi", m.use_qhi},
        {"use_qti", m.use_qti}}},
      {"train", train},
      {"eval", {{"delta", 0.5}}},
      {"bench", {{"questions", 16}, {"docs", 100}}},
      {"gradcheck",
       {{"d_model", 8},
        {"n_layers", 1},
        {"n_heads", 2},
        {"d_ff", 16},
        {"d_head_score", 4},
        {"seq_len", 16},
        {"eps", 1e-5},
        {"threshold", 1e-4},
        {"seed", 1}}},
  };
}

std::string dashed(std::string s) {
  for (auto& c : s)
    if (c == '_') c = '-';
  return s;
}

Json parse_like(const Json& like, const std::string& text, const std::string& flag) {
  try {
    std::size_t used = 0;
    Json out;
    if (like.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ppn::ConfigError(flag + " expects true or false, got '" + text + "'");
    } else if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      out = std::stoull(text, &used);
    } else if (like.is_number_integer()) {
      out = std::stoll(text, &used);
    } else if (like.is_number_float()) {
      out = std::stod(text, &used);
    } else {
      return text;
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::logic_error&) {
    throw ppn::ConfigError(flag + " got a malformed value '" + text + "'");
  }
}

struct Section {
  std::string name;
  std::string prefix;  // flag prefix, used where keys would collide
};

/// Registers one string option per config key of the given sections; after
/// parsing, `apply` overlays the config file and then the given flags.
class ConfigFlags {
 public:
  ConfigFlags(CLI::App* app, std::vector<Section> sections) : sections_(std::move(sections)) {
    app->add_option("--config", config_path_, "JSON config file; flags override it");
    const Json defaults = default_config();
    for (const auto& s : sections_)
      for (const auto& [key, value] : defaults.at(s.name).items()) {
        const std::string flag = "--" + s.prefix + dashed(key);
        auto& slot = values_[flag];
        slot.section = s.name;
        slot.key = key;
        slot.option = app->add_option(flag, slot.text, s.name + "." + key + " (default " + value.dump() + ")");
      }
  }

  Json apply() const {
    Json cfg = default_config();
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw ppn::UsageError("missing input: config file '" + config_path_ + "'");
      Json file;
      try {
        file = Json::parse(in);
      } catch (const Json::exception& e) {
        throw ppn::ParseError("config '" + config_path_ + "': " + e.what());
      }
      if (!file.is_object()) throw ppn::ConfigError("config file must hold a JSON object");
      for (const auto& [section, body] : file.items()) {
        if (!cfg.contains(section)) throw ppn::ConfigError("unknown config section '" + section + "'");
        if (!body.is_object()) throw ppn::ConfigError("config section '" + section + "' must be an object");
        for (const auto& [key, value] : body.items()) {
          if (!cfg[section].contains(key)) throw ppn::ConfigError("unknown config key '" + section + "." + key + "'");
          const auto& like = cfg[section][key];
          const bool numeric_ok = like.is_number() && value.is_number() && !(like.is_number_integer() && value.is_number_float());
          if (value.type() != like.type() && !numeric_ok)
            throw ppn::ConfigError("config key '" + section + "." + key + "' has the wrong type");
          cfg[section][key] = value;
        }
      }
    }
    for (const auto& [flag, slot] : values_)
      if (slot.option->count() > 0) cfg[slot.section][slot.key] = parse_like(cfg[slot.section][slot.key], slot.text, flag);
    return cfg;
  }

  /// The sections this command uses, for echoing into output directories.
  Json used(const Json& cfg) const {
    Json out = Json::object();
    for (const auto& s : sections_) out[s.name] = cfg.at(s.name);
    return out;
  }

 private:
  struct Slot {
    std::string section, key, text;
    CLI::Option* option = nullptr;
  };
  std::vector<Section> sections_;
  std::string config_path_;
  std::map<std::string, Slot> values_;
};

template <class T>
T get(const Json& cfg, const char* section, const char* key) {
  try {
    return cfg.at(section).at(key).get<T>();
  } catch (const Json::exception&) {
    throw ppn::ConfigError(std::string(section) + "." + key + " has the wrong type");
  }
}

ppn::GeneratorConfig generator_config(const Json& cfg) {
  ppn::GeneratorConfig g;
  g.categories = get<int>(cfg, "generator", "categories");
  g.layouts_per_category = get<int>(cfg, "generator", "layouts_per_category");
  g.docs_per_category = get<int>(cfg, "generator", "docs_per_category");
  g.min_types = get<int>(cfg, "generator", "min_types");
  g.max_types = get<int>(cfg, "generator", "max_types");
  g.no_key_ratio = get<double>(cfg, "generator", "no_key_ratio");
  g.multi_span_prob = get<double>(cfg, "generator", "multi_span_prob");
  g.absent_prob = get<double>(cfg, "generator", "absent_prob");
  g.seed = get<std::uint64_t>(cfg, "generator", "seed");
  return g;
}

ppn::ModelConfig model_config(const Json& cfg) {
  ppn::ModelConfig m;
  m.d_model = get<int>(cfg, "model", "d_model");
  m.n_layers = get<int>(cfg, "model", "n_layers");
  m.n_heads = get<int>(cfg, "model", "n_heads");
  m.d_ff = get<int>(cfg, "model", "d_ff");
  m.d_head_score = get<int>(cfg, "model", "d_head_score");
  m.max_seq_len = get<int>(cfg, "model", "max_seq_len");
  m.max_question_window = get<int>(cfg, "model", "max_question_window");
  m.layout_buckets = get<int>(cfg, "model", "layout_buckets");
  m.dropout = get<double>(cfg, "model", "dropout");
  m.use_sinusoidal = get<bool>(cfg, "model", "use_sinusoidal");
  m.use_key_channels = get<bool>(cfg, "model", "use_key_channels");
  m.use_qci = get<bool>(cfg, "model", "use_qci");
  m.use_qhi = get<bool>(cfg, "model", "use_qhi");
  m.use_qti = get<bool>(cfg, "model", "use_qti");
  return m;
}

ppn::TrainConfig train_config(const Json& cfg) {
  ppn::TrainConfig t;
  t.learning_rate = get<double>(cfg, "train", "learning_rate");
  t.epochs = get<int>(cfg, "train", "epochs");
  t.max_steps = get<int>(cfg, "train", "max_steps");
  t.batch_size = get<int>(cfg, "train", "batch_size");
  t.warmup_ratio = get<double>(cfg, "train", "warmup_ratio");
  t.eval_every_steps = get<int>(cfg, "train", "eval_every_steps");
  t.seed = get<std::uint64_t>(cfg, "train", "seed");
  t.beta1 = get<double>(cfg, "train", "beta1");
  t.beta2 = get<double>(cfg, "train", "beta2");
  t.adam_eps = get<double>(cfg, "train", "adam_eps");
  t.weight_decay = get<double>(cfg, "train", "weight_decay");
  t.clip_norm = get<double>(cfg, "train", "clip_norm");
  t.dev_size = get<int>(cfg, "train", "dev_size");
  t.delta = get<double>(cfg, "eval", "delta");
  return t;
}

// ---- file helpers ----------------------------------------------------------

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ppn::UsageError("missing input: " + what + " (flag not given)");
  if (!fs::is_regular_file(path)) throw ppn::UsageError("missing input: " + what + " '" + path + "'");
}

fs::path prepare_dir(const std::string& dir) {
  if (dir.empty()) throw ppn::UsageError("missing --out directory");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ppn::IoError("cannot create '" + dir + "': " + ec.message());
  return fs::path(dir);
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ppn::IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw ppn::IoError("write to '" + path.string() + "' failed");
}

void write_jsonl(const fs::path& path, const std::vector<Json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ppn::IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw ppn::IoError("write to '" + path.string() + "' failed");
}

std::string default_schema(const std::string& schema, const std::string& corpus) {
  if (!schema.empty()) return schema;
  return (fs::path(corpus).parent_path() / "schema.json").string();
}

ppn::GeneratedCorpus load_inputs(const std::string& corpus_path, const std::string& schema_path) {
  require_file(corpus_path, "corpus file");
  const auto schema = default_schema(schema_path, corpus_path);
  require_file(schema, "schema file");
  return {ppn::load_schema(schema), ppn::load_corpus(corpus_path)};
}

std::vector<Json> predictions_json(const std::vector<ppn::Prediction>& preds) {
  std::vector<Json> rows;
  for (const auto& p : preds) rows.push_back(ppn::to_json(p));
  return rows;
}

Json stats_json(const ppn::CorpusStats& s) {
  return Json{{"documents", s.documents},
              {"entities", s.entities},
              {"values", s.values},
              {"keyless_values", s.keyless_values},
              {"multi_span_values", s.multi_span_values},
              {"multi_span_keys", s.multi_span_keys},
              {"no_key_ratio", s.no_key_ratio()}};
}

void save_training(const fs::path& dir, const ppn::TrainResult& r) {
  ppn::save_checkpoint(r.best, (dir / "model.ckpt").string());
  r.best.vocab.save((dir / "vocab.json").string());
  write_jsonl(dir / "train_log.jsonl", r.log);
}

// ---- commands --------------------------------------------------------------

struct Paths {
  std::string corpus, schema, split, out, checkpoint, doc_id, protocol, variants;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPN key information extraction: corpus generation, training, evaluation and benchmarks"};
  app.require_subcommand(1);
  Paths p;

  auto* gen = app.add_subcommand("gen", "generate a synthetic form corpus and its schema");
  ConfigFlags gen_flags(gen, {{"generator", ""}});
  gen->add_option("--out", p.out, "output directory (corpus.jsonl, schema.json, config.json)")->required();

  auto* split = app.add_subcommand("split", "write a zero-shot, few-shot or full split");
  ConfigFlags split_flags(split, {{"split", ""}});
  split->add_option("--corpus", p.corpus, "corpus.jsonl")->required();
  split->add_option("--out", p.out, "split file to write")->required();

  auto* train = app.add_subcommand("train", "train a model on the train side of a split");
  ConfigFlags train_flags(train, {{"model", ""}, {"train", ""}, {"eval", ""}});
  train->add_option("--corpus", p.corpus, "corpus.jsonl")->required();
  train->add_option("--schema", p.schema, "schema.json (default: next to the corpus)");
  train->add_option("--split", p.split, "split file")->required();
  train->add_option("--out", p.out, "output directory (model.ckpt, vocab.json, train_log.jsonl)")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, or run train/evaluate protocols");
  ConfigFlags eval_flags(eval, {{"model", ""}, {"train", ""}, {"eval", ""}, {"split", "split-"}});
  eval->add_option("--corpus", p.corpus, "corpus.jsonl")->required();
  eval->add_option("--schema", p.schema, "schema.json (default: next to the corpus)");
  eval->add_option("--checkpoint", p.checkpoint, "model.ckpt to evaluate");
  eval->add_option("--split", p.split, "split file; its test side is evaluated (default: every document)");
  eval->add_option("--protocol", p.protocol, "comma list of zero_shot, few_shot, full: train and evaluate each");
  eval->add_option("--out", p.out, "output directory")->required();

  auto* decode = app.add_subcommand("decode", "print the prediction for one document");
  ConfigFlags decode_flags(decode, {{"eval", ""}});
  decode->add_option("--checkpoint", p.checkpoint, "model.ckpt")->required();
  decode->add_option("--corpus", p.corpus, "corpus.jsonl")->required();
  decode->add_option("--schema", p.schema, "schema.json (default: next to the corpus)");
  decode->add_option("--doc-id", p.doc_id, "document id")->required();

  auto* bench = app.add_subcommand("bench", "time parallel against one-question-at-a-time inference");
  ConfigFlags bench_flags(bench, {{"bench", ""}, {"generator", ""}, {"model", ""}, {"eval", ""}});
  bench->add_option("--checkpoint", p.checkpoint, "model.ckpt (default: a seeded untrained model)");
  bench->add_option("--corpus", p.corpus, "corpus.jsonl (default: a generated single-category corpus)");
  bench->add_option("--schema", p.schema, "schema.json (default: next to the corpus)");
  bench->add_option("--out", p.out, "optional directory for the report and both prediction sets");

  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  ConfigFlags gradcheck_flags(gradcheck, {{"gradcheck", ""}});
  gradcheck->add_option("--out", p.out, "optional directory for the report");

  auto* ablate = app.add_subcommand("ablate", "train the full model and one model per disabled component");
  ConfigFlags ablate_flags(ablate, {{"model", ""}, {"train", ""}, {"eval", ""}});
  ablate->add_option("--corpus", p.corpus, "corpus.jsonl")->required();
  ablate->add_option("--schema", p.schema, "schema.json (default: next to the corpus)");
  ablate->add_option("--split", p.split, "split file")->required();
  ablate->add_option("--variants", p.variants, "comma list from sin,key,qci,qhi,qti (default: all)");
  ablate->add_option("--out", p.out, "output directory")->required();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      throw ppn::UsageError(e.what());
    }

    if (gen->parsed()) {
      const Json cfg = gen_flags.apply();
      const auto corpus = ppn::generate_corpus(generator_config(cfg));
      const auto dir = prepare_dir(p.out);
      ppn::save_corpus(corpus.docs, (dir / "corpus.jsonl").string());
      ppn::save_schema(corpus.schemas, (dir / "schema.json").string());
      write_json(dir / "config.json", gen_flags.used(cfg));
      std::cout << stats_json(ppn::corpus_stats(corpus.docs)).dump() << '\n';
    } else if (split->parsed()) {
      const Json cfg = split_flags.apply();
      require_file(p.corpus, "corpus file");
      const auto docs = ppn::load_corpus(p.corpus);
      const auto spec = ppn::make_splits(docs, ppn::parse_split_mode(get<std::string>(cfg, "split", "mode")),
                                         get<int>(cfg, "split", "k"), get<std::uint64_t>(cfg, "split", "seed"));
      ppn::save_split(spec, p.out);
      std::cout << Json{{"train", spec.train_ids.size()}, {"test", spec.test_ids.size()}}.dump() << '\n';
    } else if (train->parsed()) {
      const Json cfg = train_flags.apply();
      const auto corpus = load_inputs(p.corpus, p.schema);
      require_file(p.split, "split file");
      const auto spec = ppn::load_split(p.split);
      const auto train_docs = ppn::select_documents(corpus.docs, spec.train_ids);
      const auto vocab = ppn::Vocab::build(train_docs, corpus.schemas);
      const auto dir = prepare_dir(p.out);
      write_json(dir / "config.json", train_flags.used(cfg));
      const auto result = ppn::train(train_config(cfg), model_config(cfg), vocab, corpus.schemas, train_docs);
      save_training(dir, result);
      std::cout << result.best.extra.dump() << '\n';
    } else if (eval->parsed()) {
      const Json cfg = eval_flags.apply();
      const auto corpus = load_inputs(p.corpus, p.schema);
      const auto dir = prepare_dir(p.out);
      write_json(dir / "config.json", eval_flags.used(cfg));
      if (!p.protocol.empty()) {
        std::vector<ppn::ProtocolRequest> modes;
        std::stringstream list(p.protocol);
        for (std::string m; std::getline(list, m, ',');) {
          const auto mode = ppn::parse_split_mode(m);
          modes.push_back({mode, mode == ppn::SplitMode::few_shot ? get<int>(cfg, "split", "k") : 0});
        }
        const auto runs = ppn::run_protocol(corpus, modes, get<std::uint64_t>(cfg, "split", "seed"), model_config(cfg),
                                            train_config(cfg));
        for (const auto& r : runs) {
          const auto sub = prepare_dir((dir / r.name).string());
          save_training(sub, r.training);
          ppn::save_split(r.split, (sub / "split.json").string());
        }
        const Json report = ppn::protocol_report(runs);
        write_json(dir / "protocol.json", report);
        std::cout << report.dump() << '\n';
      } else {
        if (p.checkpoint.empty()) throw ppn::UsageError("missing input: --checkpoint (or --protocol)");
        require_file(p.checkpoint, "checkpoint");
        const auto ck = ppn::load_checkpoint(p.checkpoint);
        std::vector<ppn::Document> docs = corpus.docs;
        std::string mode = "all";
        if (!p.split.empty()) {
          require_file(p.split, "split file");
          const auto spec = ppn::load_split(p.split);
          docs = ppn::select_documents(corpus.docs, spec.test_ids);
          mode = ppn::protocol_name(spec.mode, spec.k);
        }
        const double delta = get<double>(cfg, "eval", "delta");
        const auto preds = ppn::predict_all(ck.params, ck.config, ck.vocab, corpus.schemas, docs, delta);
        const auto metrics = ppn::score_documents(docs, preds, mode);
        write_json(dir / "metrics.json", metrics.to_json());
        write_jsonl(dir / "predictions.jsonl", predictions_json(preds));
        std::cout << metrics.to_json().dump() << '\n';
      }
    } else if (decode->parsed()) {
      const Json cfg = decode_flags.apply();
      const auto corpus = load_inputs(p.corpus, p.schema);
      require_file(p.checkpoint, "checkpoint");
      const auto ck = ppn::load_checkpoint(p.checkpoint);
      const auto docs = ppn::select_documents(corpus.docs, {p.doc_id});
      const auto pred = ppn::predict(ck.params, ck.config, ck.vocab, ppn::build_question_set(docs[0], corpus.schemas),
                                     docs[0], get<double>(cfg, "eval", "delta"));
      std::cout << ppn::to_json(pred).dump() << '\n';
    } else if (bench->parsed()) {
      const Json cfg = bench_flags.apply();
      const int q = get<int>(cfg, "bench", "questions");
      const int n_docs = get<int>(cfg, "bench", "docs");
      ppn::GeneratedCorpus corpus;
      if (!p.corpus.empty()) {
        corpus = load_inputs(p.corpus, p.schema);
        if (static_cast<int>(corpus.docs.size()) > n_docs) corpus.docs.resize(static_cast<std::size_t>(n_docs));
      } else {
        auto g = generator_config(cfg);
        g.categories = 1;
        g.docs_per_category = n_docs;
        g.min_types = std::max(g.min_types, q);
        g.max_types = std::max(g.max_types, g.min_types);
        corpus = ppn::generate_corpus(g);
      }
      ppn::Checkpoint ck;
      if (!p.checkpoint.empty()) {
        require_file(p.checkpoint, "checkpoint");
        ck = ppn::load_checkpoint(p.checkpoint);
      } else {
        ck.vocab = ppn::Vocab::build(corpus.docs, corpus.schemas);
        ck.config = model_config(cfg);
        ck.config.vocab_size = ck.vocab.size();
        ck.params = ppn::init_params<float>(ck.config, get<std::uint64_t>(cfg, "generator", "seed"));
      }
      const auto result = ppn::speed_bench(ck.params, ck.config, ck.vocab, corpus.schemas, corpus.docs, q,
                                           get<double>(cfg, "eval", "delta"));
      if (!p.out.empty()) {
        const auto dir = prepare_dir(p.out);
        write_json(dir / "config.json", bench_flags.used(cfg));
        write_json(dir / "speed.json", result.report.to_json());
        write_jsonl(dir / "predictions_parallel.jsonl", predictions_json(result.parallel));
        write_jsonl(dir / "predictions_sequential.jsonl", predictions_json(result.sequential));
      }
      std::cout << result.report.to_json().dump() << '\n';
    } else if (gradcheck->parsed()) {
      const Json cfg = gradcheck_flags.apply();
      ppn::ModelConfig m;
      m.d_model = get<int>(cfg, "gradcheck", "d_model");
      m.n_layers = get<int>(cfg, "gradcheck", "n_layers");
      m.n_heads = get<int>(cfg, "gradcheck", "n_heads");
      m.d_ff = get<int>(cfg, "gradcheck", "d_ff");
      m.d_head_score = get<int>(cfg, "gradcheck", "d_head_score");
      m.vocab_size = ppn::Vocab::kReserved + 1;
      const int seq_len = get<int>(cfg, "gradcheck", "seq_len");
      m.max_seq_len = seq_len;
      const auto report = ppn::grad_check_tiny(m, seq_len, get<std::uint64_t>(cfg, "gradcheck", "seed"),
                                               get<double>(cfg, "gradcheck", "eps"));
      if (!p.out.empty()) {
        const auto dir = prepare_dir(p.out);
        write_json(dir / "config.json", gradcheck_flags.used(cfg));
        write_json(dir / "gradcheck.json", report.to_json());
      }
      std::cout << Json{{"max_rel_error", report.max_rel_error}, {"worst_tensor", report.worst_tensor},
                        {"coords_checked", report.coords_checked}}
                       .dump()
                << '\n';
      const double threshold = get<double>(cfg, "gradcheck", "threshold");
      if (!(report.max_rel_error < threshold)) {
        std::ostringstream msg;
        msg << "max relative error " << report.max_rel_error << " is not below " << threshold;
        throw ppn::NumericError(msg.str());
      }
    } else if (ablate->parsed()) {
      const Json cfg = ablate_flags.apply();
      const auto corpus = load_inputs(p.corpus, p.schema);
      require_file(p.split, "split file");
      const auto spec = ppn::load_split(p.split);
      std::vector<std::string> flags;
      if (p.variants.empty()) {
        flags = ppn::ablation_flags();
      } else {
        std::stringstream list(p.variants);
        for (std::string f; std::getline(list, f, ',');) flags.push_back(f);
      }
      const auto dir = prepare_dir(p.out);
      write_json(dir / "config.json", ablate_flags.used(cfg));
      const auto rows = ppn::run_ablations(corpus, spec, flags, model_config(cfg), train_config(cfg));
      for (const auto& r : rows) save_training(prepare_dir((dir / r.variant).string()), r.training);
      const Json report = ppn::ablation_report(rows);
      write_json(dir / "ablation.json", report);
      std::cout << report.dump() << '\n';
    }
  } catch (const ppn::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
