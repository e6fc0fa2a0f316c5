#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "srlgnn/gnn/gradient_suite.hpp"
#include "srlgnn/pipeline/run.hpp"

namespace srlgnn::cli {

namespace detail {

/// Flags shared by `train` and `sweep`.
struct TrainFlags {
  std::string config;
  pipeline::ExperimentConfig exp;
  std::size_t epochs = 0;
  std::string mode;
  std::string precision = "f32";
};

inline void add_train_flags(CLI::App& cmd, TrainFlags& f) {
  cmd.add_option("--config", f.config, "Model config JSON (d_lm, d_gcn, n_gcn_layers, ...)")
      ->check(CLI::ExistingFile);
  cmd.add_option("--corpus", f.exp.corpus, "Training corpus (JSONL)")->required()->check(CLI::ExistingFile);
  cmd.add_option("--dev-corpus", f.exp.dev_corpus, "Development corpus, scored once after training")
      ->check(CLI::ExistingFile);
  cmd.add_option("--test-corpus", f.exp.test_corpus, "Held-out corpus for the final metrics")
      ->check(CLI::ExistingFile);
  cmd.add_option("--srl", f.exp.srl, "SRL annotations (JSON)")->check(CLI::ExistingFile);
  cmd.add_option("--labels", f.exp.labels, "Label set: iemocap4, friends8, friends4 or a,b,c")
      ->capture_default_str();
  cmd.add_option("--epochs", f.epochs, "Epochs (default 9 for iemocap-style, 11 for friends-style sets)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--batch-size", f.exp.batch_size, "Context windows per optimizer step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--lr", f.exp.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--seed", f.exp.seed, "Seed for initialization and data order")->capture_default_str();
  cmd.add_option("--mode", f.mode, "Attention normalization, overrides the config")
      ->check(CLI::IsMember({"softmax", "literal"}));
  cmd.add_option("--precision", f.precision, "Floating point width")
      ->capture_default_str()
      ->check(CLI::IsMember({"f32", "f64"}));
  cmd.add_option("--out", f.exp.out, "Output directory for the checkpoint, report and predictions");
  cmd.add_flag("--disable-graph", f.exp.disable_graph, "Force the empty-graph path for every utterance");
  cmd.add_flag("--stop-when-fit", f.exp.stop_when_fit, "Stop once training accuracy reaches 100%");
}

inline pipeline::ExperimentConfig finish(TrainFlags& f) {
  auto cfg = f.exp;
  if (!f.config.empty()) cfg.model = ModelConfig::load(f.config);
  if (!f.mode.empty()) cfg.model.attention_mode = parse_attention_mode(f.mode);
  if (f.epochs > 0) cfg.epochs = f.epochs;
  cfg.precision = pipeline::parse_precision(f.precision);
  return cfg;
}

/// Precision recorded in a checkpoint's header line.
inline std::string checkpoint_precision(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string line;
  std::getline(in, line);
  try {
    return nlohmann::json::parse(line).value("precision", "f32");
  } catch (const nlohmann::json::exception&) {
    throw ParseError("checkpoint " + path + ": malformed header");
  }
}

template <typename T>
SrlGnnModel<T> load_model(const std::string& path, const std::string& mode) {
  auto model = SrlGnnModel<T>::load(path);
  if (!mode.empty()) model.set_attention_mode(parse_attention_mode(mode));
  return model;
}

inline std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : labelsets::split_list(text)) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("context sizes must be non-negative integers, got '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("no context sizes given");
  return out;
}

inline nlohmann::json sweep_to_json(const std::vector<pipeline::SweepRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"model", r.model},
                   {"context", r.context_n},
                   {"seed", r.seed},
                   {"WA", r.weighted_accuracy},
                   {"UA", r.unweighted_accuracy}});
  }
  return out;
}

/// Name under which `labels` is known to the corpus reader: a built-in
/// set's name when it matches one, the comma-joined list otherwise.
inline std::string label_set_name(const LabelSet& labels) {
  for (const char* name : {"iemocap4", "friends8", "friends4"}) {
    if (LabelSet::named(name) == labels) return name;
  }
  std::string joined;
  for (const auto& l : labels.labels()) joined += (joined.empty() ? "" : ",") + l;
  return joined;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

template <typename T>
nlohmann::json predict_json(const SrlGnnModel<T>& model, const std::string& text,
                            const std::vector<std::string>& context, const std::string& srl_json) {
  ContextWindow window{"input", Utterance{"target", "", text, {}, std::nullopt}, {}, context.size()};
  for (std::size_t i = 0; i < context.size(); ++i) {
    window.context.push_back(Utterance{"ctx" + std::to_string(i + 1), "", context[i], {}, std::nullopt});
  }
  std::vector<SrlFrame> frames;
  if (!srl_json.empty()) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(srl_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("--srl: malformed JSON: ") + e.what());
    }
    frames = parse_frames(doc, "--srl");
  }
  const auto graph = model.target_graph(window, frames);
  const auto result = model.classify_graph(window, graph);
  nlohmann::json logits = nlohmann::json::object();
  nlohmann::json alphas = nlohmann::json::object();
  const auto& labels = model.labels().labels();
  for (std::size_t e = 0; e < labels.size(); ++e) {
    logits[labels[e]] = result.logits[e];
    alphas[labels[e]] = result.alphas[e];
  }
  return {{"pred", labels[result.predicted]},
          {"logits", logits},
          {"alphas", alphas},
          {"empty_graph", graph.nodes.empty()},
          {"graph", graph_to_json(graph)}};
}

inline nlohmann::json gradient_json(const GradientSuiteResult& r) {
  auto section = [](const std::vector<GradientReport>& reports) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& g : reports) out[g.name] = {{"max_rel_error", g.max_rel_error}, {"worst", g.worst}};
    return out;
  };
  return {{"groups", section(r.groups)},
          {"ops", section(r.ops)},
          {"group_tolerance", r.group_tolerance},
          {"op_tolerance", r.op_tolerance},
          {"passed", r.passed()}};
}

inline void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace detail

/// Parses `argv` and runs one subcommand. Payloads go to `out`, progress
/// and errors to `err`. Returns 0 on success, 1 on runtime errors and 2 on
/// usage errors.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SRL-graph-augmented emotion classification for conversations"};
  app.name("srlgnn");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  detail::TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train a model and report metrics");
  detail::add_train_flags(*train, train_flags);
  train->add_option("--context", train_flags.exp.context_n, "Preceding utterances per window")
      ->capture_default_str();

  detail::TrainFlags sweep_flags;
  std::string sweep_values = "0,1,2,4,8";
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate once per context size");
  detail::add_train_flags(*sweep, sweep_flags);
  sweep->add_option("--values", sweep_values, "Comma-separated context sizes")->capture_default_str();

  struct {
    std::string checkpoint, config, corpus, srl, labels, out, mode, precision;
    std::size_t context = 0;
    std::uint64_t seed = 0;
  } ev;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a corpus");
  eval->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", ev.corpus, "Corpus to score (JSONL)")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", ev.config, "Model config the checkpoint must match")->check(CLI::ExistingFile);
  eval->add_option("--srl", ev.srl, "SRL annotations (JSON)")->check(CLI::ExistingFile);
  eval->add_option("--labels", ev.labels, "Label set; defaults to the checkpoint's");
  eval->add_option("--context", ev.context, "Preceding utterances per window")->capture_default_str();
  eval->add_option("--seed", ev.seed, "Accepted for uniformity; evaluation draws no random numbers");
  eval->add_option("--mode", ev.mode, "Attention normalization, overrides the checkpoint")
      ->check(CLI::IsMember({"softmax", "literal"}));
  eval->add_option("--precision", ev.precision, "Floating point width; defaults to the checkpoint's")
      ->check(CLI::IsMember({"f32", "f64"}));
  eval->add_option("--out", ev.out, "Directory for report.json and predictions.jsonl");

  struct {
    std::string checkpoint, text, srl, labels, mode, precision;
    std::vector<std::string> context;
    std::uint64_t seed = 0;
  } pr;
  auto* predict = app.add_subcommand("predict", "Classify one utterance");
  predict->add_option("--checkpoint", pr.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--text", pr.text, "Target utterance")->required();
  predict->add_option("--context", pr.context, "Preceding utterance, oldest first; repeatable")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  predict->add_option("--srl", pr.srl, R"(Inline SRL frames, e.g. [{"predicate":[1,2],"arguments":[[0,1]]}])");
  predict->add_option("--labels", pr.labels, "Expected label set; must match the checkpoint's");
  predict->add_option("--seed", pr.seed, "Accepted for uniformity; prediction draws no random numbers");
  predict->add_option("--mode", pr.mode, "Attention normalization, overrides the checkpoint")
      ->check(CLI::IsMember({"softmax", "literal"}));
  predict->add_option("--precision", pr.precision, "Floating point width; defaults to the checkpoint's")
      ->check(CLI::IsMember({"f32", "f64"}));

  struct {
    std::string corpus, srl, labels = "iemocap4", out;
  } bg;
  auto* graphs = app.add_subcommand("build-graphs", "Emit the predicate-argument graph of every utterance");
  graphs->add_option("--corpus", bg.corpus, "Corpus (JSONL)")->required()->check(CLI::ExistingFile);
  graphs->add_option("--srl", bg.srl, "SRL annotations (JSON)")->required()->check(CLI::ExistingFile);
  graphs->add_option("--labels", bg.labels, "Label set used to read the corpus")->capture_default_str();
  graphs->add_option("--out", bg.out, "Write JSONL here instead of stdout");

  struct {
    std::string corpus, srl, labels = "iemocap4";
  } vs;
  auto* validate = app.add_subcommand("validate-srl", "Cross-check SRL spans against a corpus");
  validate->add_option("--corpus", vs.corpus, "Corpus (JSONL)")->required()->check(CLI::ExistingFile);
  validate->add_option("--srl", vs.srl, "SRL annotations (JSON)")->required()->check(CLI::ExistingFile);
  validate->add_option("--labels", vs.labels, "Label set used to read the corpus")->capture_default_str();

  std::uint64_t gc_seed = 7;
  double gc_eps = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gradcheck->add_option("--seed", gc_seed, "Seed of the checked model and op inputs")->capture_default_str();
  gradcheck->add_option("--eps", gc_eps, "Central-difference step")->capture_default_str()->check(
      CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::write_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (train->parsed()) {
      const auto cfg = detail::finish(train_flags);
      const auto report = cfg.precision == pipeline::Precision::kF64 ? pipeline::train<double>(cfg, err).report
                                                                     : pipeline::train<float>(cfg, err).report;
      out << report.to_json().dump(2) << '\n';
    } else if (sweep->parsed()) {
      const auto cfg = detail::finish(sweep_flags);
      const auto values = detail::parse_sizes(sweep_values);
      const auto rows = cfg.precision == pipeline::Precision::kF64
                            ? pipeline::context_sweep<double>(cfg, values, err)
                            : pipeline::context_sweep<float>(cfg, values, err);
      const auto table = pipeline::sweep_table(rows);
      if (!cfg.out.empty()) {
        std::filesystem::create_directories(cfg.out);
        detail::write_text(cfg.out + "/sweep.tsv", table);
        detail::write_text(cfg.out + "/sweep.json", detail::sweep_to_json(rows).dump(2) + "\n");
      }
      out << table;
    } else if (eval->parsed()) {
      const std::string precision = ev.precision.empty() ? detail::checkpoint_precision(ev.checkpoint) : ev.precision;
      pipeline::ExperimentConfig cfg;
      cfg.corpus = ev.corpus;
      cfg.srl = ev.srl;
      cfg.context_n = ev.context;
      cfg.out = ev.out;
      cfg.seed = ev.seed;
      cfg.precision = pipeline::parse_precision(precision);
      std::optional<ModelConfig> expected;
      if (!ev.config.empty()) expected = ModelConfig::load(ev.config);
      auto run_eval = [&](const auto& model) {
        cfg.labels = ev.labels.empty() ? detail::label_set_name(model.labels()) : ev.labels;
        cfg.model = model.config();
        return pipeline::evaluate(model, cfg, expected, err);
      };
      const auto report = precision == "f64" ? run_eval(detail::load_model<double>(ev.checkpoint, ev.mode))
                                             : run_eval(detail::load_model<float>(ev.checkpoint, ev.mode));
      out << report.to_json().dump(2) << '\n';
    } else if (predict->parsed()) {
      const std::string precision = pr.precision.empty() ? detail::checkpoint_precision(pr.checkpoint) : pr.precision;
      auto run_predict = [&](const auto& model) {
        if (!pr.labels.empty() && !(LabelSet::named(pr.labels) == model.labels())) {
          throw ConfigError("checkpoint labels differ from label set '" + pr.labels + "'");
        }
        return detail::predict_json(model, pr.text, pr.context, pr.srl);
      };
      const auto result = precision == "f64" ? run_predict(detail::load_model<double>(pr.checkpoint, pr.mode))
                                             : run_predict(detail::load_model<float>(pr.checkpoint, pr.mode));
      out << result.dump() << '\n';
    } else if (graphs->parsed()) {
      const auto corpus = load_corpus(bg.corpus, CorpusSchema::named(bg.labels));
      const auto srl = parse_srl_file(bg.srl);
      for (const auto& p : find_srl_problems(srl, corpus)) {
        if (p.kind == SrlProblem::Kind::kOutOfRange) throw ValidationError(p.message);
        err << "warning: " << p.message << '\n';
      }
      std::ofstream file;
      if (!bg.out.empty()) {
        file.open(bg.out);
        if (!file) throw IoError("cannot write " + bg.out);
      }
      std::ostream& sink = bg.out.empty() ? out : file;
      for (const auto& conv : corpus) {
        for (const auto& u : conv.utterances) {
          const auto key = srl_key(conv.id, u.id);
          auto it = srl.find(key);
          const std::size_t tokens = tokenize(u.text).size();
          const PaGraph g = it == srl.end() ? PaGraph{{}, {}, tokens} : build_graph(it->second, tokens);
          auto j = graph_to_json(g);
          j["key"] = key;
          j["has_srl"] = it != srl.end();
          sink << j.dump() << '\n';
        }
      }
    } else if (validate->parsed()) {
      const auto corpus = load_corpus(vs.corpus, CorpusSchema::named(vs.labels));
      const auto srl = parse_srl_file(vs.srl);
      const auto problems = find_srl_problems(srl, corpus);
      if (!problems.empty()) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& p : problems) list.push_back({{"key", p.key}, {"message", p.message}});
        err << nlohmann::json{{"error",
                               {{"kind", "validation"}, {"message", problems.front().message}, {"problems", list}}}}
                   .dump()
            << '\n';
        return 1;
      }
      std::size_t frames = 0;
      for (const auto& [key, list] : srl) frames += list.size();
      std::size_t utterances = 0;
      for (const auto& conv : corpus) utterances += conv.utterances.size();
      out << nlohmann::json{{"ok", true},
                            {"annotated_utterances", srl.size()},
                            {"corpus_utterances", utterances},
                            {"frames", frames}}
                 .dump()
          << '\n';
    } else if (gradcheck->parsed()) {
      const auto result = run_gradient_suite(gc_seed, gc_eps);
      out << detail::gradient_json(result).dump(2) << '\n';
      if (!result.passed()) {
        detail::write_error(err, "gradient", "finite-difference check exceeded tolerance");
        return 1;
      }
    }
  } catch (const Error& e) {
    detail::write_error(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    detail::write_error(err, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace srlgnn::cli
