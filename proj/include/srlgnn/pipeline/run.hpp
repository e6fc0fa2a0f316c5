#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "srlgnn/corpus.hpp"
#include "srlgnn/gnn/model.hpp"
#include "srlgnn/pipeline/config.hpp"
#include "srlgnn/pipeline/report.hpp"
#include "srlgnn/rng.hpp"
#include "srlgnn/srl_graph.hpp"
#include "srlgnn/tensor/adam.hpp"

namespace srlgnn::pipeline {

/// A classification target with its context and its (full, untruncated)
/// predicate-argument graph.
struct Sample {
  ContextWindow window;
  PaGraph graph;
  std::string gold;
};

inline SrlAnnotations load_annotations(const ExperimentConfig& cfg) {
  return cfg.srl.empty() ? SrlAnnotations{} : parse_srl_file(cfg.srl);
}

/// Windows of every gold-bearing utterance of `path`. Out-of-range spans
/// are errors; utterances without annotations take the empty-graph path.
inline std::vector<Sample> load_samples(const std::string& path, const ExperimentConfig& cfg,
                                        const SrlAnnotations& srl, std::ostream& log) {
  const auto schema = CorpusSchema::named(cfg.labels);
  const auto corpus = load_corpus(path, schema);
  for (const auto& problem : find_srl_problems(srl, corpus)) {
    if (problem.kind == SrlProblem::Kind::kOutOfRange) throw ValidationError(problem.message);
  }
  std::vector<Sample> samples;
  std::size_t missing = 0;
  for (const auto& conv : corpus) {
    for (auto& w : make_windows(prepare_targets(conv, schema), cfg.context_n)) {
      const auto tokens = tokenize(w.target.text).size();
      PaGraph graph{{}, {}, tokens};
      auto it = srl.find(srl_key(w.conv_id, w.target.id));
      if (it == srl.end()) {
        ++missing;
      } else if (!cfg.disable_graph) {
        graph = build_graph(it->second, tokens);
      }
      std::string gold = *w.target.gold;
      samples.push_back({std::move(w), std::move(graph), std::move(gold)});
    }
  }
  if (samples.empty()) throw ValidationError(path + ": no utterance carries a label of set '" + cfg.labels + "'");
  if (missing > 0) {
    log << "warning: " << missing << " of " << samples.size() << " targets in " << path
        << " have no SRL frames; using empty graphs\n";
  }
  return samples;
}

template <typename T>
std::vector<Prediction> predict_samples(const SrlGnnModel<T>& model, const std::vector<Sample>& samples) {
  std::vector<Prediction> out;
  out.reserve(samples.size());
  const auto& labels = model.labels().labels();
  for (const auto& s : samples) {
    const auto result = model.classify_graph(s.window, s.graph);
    Prediction p{s.window.conv_id, s.window.target.id, s.gold, labels[result.predicted], {}};
    for (std::size_t e = 0; e < labels.size(); ++e) p.logits.emplace_back(labels[e], result.logits[e]);
    out.push_back(std::move(p));
  }
  return out;
}

inline Metrics score(const std::vector<Prediction>& preds, const LabelSet& labels) {
  std::vector<LabeledPrediction> pairs;
  pairs.reserve(preds.size());
  for (const auto& p : preds) pairs.emplace_back(p.gold, p.pred);
  return compute_metrics(pairs, labels);
}

/// Sum over emotions of the one-vs-all losses of one sample; gradients are
/// added into `grads`.
template <typename T>
double sample_loss(const SrlGnnModel<T>& model, const Sample& s, std::vector<Tensor<T>>& grads) {
  double total = 0.0;
  for (const auto& emotion : model.labels().labels()) {
    Tape<T> tape;
    BoundParams<T> bound(tape, model.params());
    auto f = model.forward(s.window, emotion, s.graph, bound);
    auto loss = ops::bce_with_logits(f.logit, emotion == s.gold ? T(1) : T(0));
    tape.backward(loss);
    bound.accumulate_grads(grads);
    total += static_cast<double>(loss.value()[0]);
  }
  return total;
}

inline void write_outputs(const std::string& dir, const RunReport& report) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/report.json");
  if (!out) throw IoError("cannot write " + dir + "/report.json");
  out << report.to_json().dump(2) << '\n';
  save_predictions(dir + "/predictions.jsonl", report.predictions);
}

template <typename T>
struct TrainResult {
  SrlGnnModel<T> model;
  RunReport report;
};

/// Trains on `cfg.corpus`, then scores the test corpus when one is given
/// and the training corpus otherwise. Each epoch visits the samples in a
/// freshly shuffled order; each batch takes one Adam step on the loss
/// averaged over its samples.
template <typename T>
TrainResult<T> train(const ExperimentConfig& cfg, std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  const auto labels = LabelSet::named(cfg.labels);
  const auto srl = load_annotations(cfg);
  const auto samples = load_samples(cfg.corpus, cfg, srl, log);

  ModelConfig model_cfg = cfg.model;
  model_cfg.seed = cfg.seed;
  auto vocab = Vocab::build(load_corpus(cfg.corpus, CorpusSchema::named(cfg.labels)), labels, kDefaultAuxiliary);
  auto model = SrlGnnModel<T>::create(model_cfg, std::move(vocab), labels);

  AdamConfig adam;
  adam.lr = cfg.lr;
  AdamState<T> state(adam, model.params().tensors());
  Rng order_rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  RunReport report;
  report.config = cfg.to_json();
  report.labels = labels;
  const std::size_t epochs = cfg.epoch_count();
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_id = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_id) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      auto grads = model.params().zeros_like();
      try {
        for (std::size_t k = begin; k < end; ++k) epoch_loss += sample_loss(model, samples[order[k]], grads);
        const T scale = T(1) / static_cast<T>(end - begin);
        for (auto& g : grads)
          for (auto& v : g.values()) v *= scale;
        adam_step(model.params().tensors(), grads, state);
        for (const auto& p : model.params().tensors()) {
          if (!p.all_finite()) throw NumericError("parameters became non-finite");
        }
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_id) +
                           ": non-finite loss or update (" + e.what() + ")");
      }
    }
    EpochRecord record{epoch, epoch_loss / static_cast<double>(samples.size()), std::nullopt};
    if (cfg.stop_when_fit) {
      record.train_accuracy = score(predict_samples(model, samples), labels).weighted_accuracy;
    }
    log << "epoch " << epoch << "/" << epochs << " loss " << record.loss;
    if (record.train_accuracy) log << " train_accuracy " << *record.train_accuracy;
    log << '\n';
    report.epochs.push_back(record);
    if (record.train_accuracy && *record.train_accuracy == 1.0) break;
  }

  if (!cfg.dev_corpus.empty()) {
    report.dev_metrics = score(predict_samples(model, load_samples(cfg.dev_corpus, cfg, srl, log)), labels);
  }
  if (cfg.test_corpus.empty()) {
    report.split = "train";
    report.predictions = predict_samples(model, samples);
  } else {
    report.split = "test";
    report.predictions = predict_samples(model, load_samples(cfg.test_corpus, cfg, srl, log));
  }
  report.metrics = score(report.predictions, labels);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!cfg.out.empty()) {
    write_outputs(cfg.out, report);
    model.save(cfg.out + "/model.ckpt");
  }
  return {std::move(model), std::move(report)};
}

/// Scores a trained model on `cfg.test_corpus` (or `cfg.corpus`). When
/// `expected` is given the checkpoint's model config must agree with it.
template <typename T>
RunReport evaluate(const SrlGnnModel<T>& model, const ExperimentConfig& cfg,
                   const std::optional<ModelConfig>& expected, std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  if (expected) {
    if (auto field = model.config().first_difference(*expected)) {
      throw ConfigError("checkpoint model config differs from the given config in field '" + *field + "'");
    }
  }
  const auto labels = LabelSet::named(cfg.labels);
  if (labels != model.labels()) {
    throw ConfigError("checkpoint labels differ from label set '" + cfg.labels + "'");
  }
  const std::string path = cfg.test_corpus.empty() ? cfg.corpus : cfg.test_corpus;
  if (path.empty()) throw ConfigError("no corpus given");
  RunReport report;
  report.config = cfg.to_json();
  report.config["model"] = model.config().to_json();
  report.labels = labels;
  report.split = cfg.test_corpus.empty() ? "corpus" : "test";
  report.predictions = predict_samples(model, load_samples(path, cfg, load_annotations(cfg), log));
  report.metrics = score(report.predictions, labels);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!cfg.out.empty()) write_outputs(cfg.out, report);
  return report;
}

struct SweepRow {
  std::string model;  // "SRL-GNN-<n>"
  std::size_t context_n = 0;
  std::uint64_t seed = 0;
  double weighted_accuracy = 0.0;
  double unweighted_accuracy = 0.0;
};

/// One full train + evaluate per context size; run i uses seed
/// `cfg.seed + i` and writes under `<out>/ctx-<n>` when `cfg.out` is set.
template <typename T>
std::vector<SweepRow> context_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& values,
                                    std::ostream& log) {
  if (values.empty()) throw ConfigError("sweep needs at least one context size");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig run = cfg;
    run.context_n = values[i];
    run.seed = cfg.seed + i;
    if (!cfg.out.empty()) run.out = cfg.out + "/ctx-" + std::to_string(values[i]);
    log << "sweep: context " << values[i] << " seed " << run.seed << '\n';
    const auto result = train<T>(run, log);
    rows.push_back({"SRL-GNN-" + std::to_string(values[i]), values[i], run.seed,
                    result.report.metrics.weighted_accuracy, result.report.metrics.unweighted_accuracy});
  }
  return rows;
}

/// Tab-separated table, one row per context size, accuracies in percent.
inline std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "model\tcontext\tseed\tWA\tUA\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f\t%.2f", 100.0 * r.weighted_accuracy, 100.0 * r.unweighted_accuracy);
    out << r.model << '\t' << r.context_n << '\t' << r.seed << '\t' << buf << '\n';
  }
  return out.str();
}

}  // namespace srlgnn::pipeline
