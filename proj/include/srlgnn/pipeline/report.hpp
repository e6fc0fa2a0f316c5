#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "srlgnn/corpus.hpp"
#include "srlgnn/error.hpp"

namespace srlgnn::pipeline {

struct Prediction {
  std::string conv_id;
  std::string utt_id;
  std::string gold;
  std::string pred;
  std::vector<std::pair<std::string, double>> logits;  // label order

  nlohmann::json to_json() const {
    nlohmann::json l = nlohmann::json::object();
    for (const auto& [label, value] : logits) l[label] = value;
    return {{"conv_id", conv_id}, {"utt_id", utt_id}, {"gold", gold}, {"pred", pred}, {"logits", l}};
  }
};

inline void write_predictions(std::ostream& out, const std::vector<Prediction>& preds) {
  for (const auto& p : preds) out << p.to_json().dump() << '\n';
}

inline void save_predictions(const std::string& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write predictions " + path);
  write_predictions(out, preds);
}

/// Reads back the (gold, pred) pairs of a prediction dump.
inline std::vector<LabeledPrediction> load_prediction_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions " + path);
  std::vector<LabeledPrediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.emplace_back(j.at("gold").get<std::string>(), j.at("pred").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what(), lineno);
    }
  }
  return out;
}

inline nlohmann::json metrics_to_json(const Metrics& m, const LabelSet& labels) {
  nlohmann::json per_label = nlohmann::json::object();
  for (const auto& [label, acc] : m.per_label_accuracy) per_label[label] = acc;
  return {{"weighted_accuracy", m.weighted_accuracy},
          {"unweighted_accuracy", m.unweighted_accuracy},
          {"per_label_accuracy", per_label},
          {"confusion", {{"labels", labels.labels()}, {"counts", m.confusion}}},
          {"total", m.total},
          {"correct", m.correct}};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean over utterances of the summed per-emotion losses
  std::optional<double> train_accuracy;
};

struct RunReport {
  nlohmann::json config;
  std::vector<EpochRecord> epochs;
  std::string split;  // which corpus `metrics` describes
  LabelSet labels{std::vector<std::string>{"_a", "_b"}};
  Metrics metrics;
  std::optional<Metrics> dev_metrics;
  std::vector<Prediction> predictions;
  double wall_time_seconds = 0.0;

  /// Everything except the predictions, which go to their own dump.
  nlohmann::json to_json() const {
    nlohmann::json e = nlohmann::json::array();
    for (const auto& r : epochs) {
      nlohmann::json row = {{"epoch", r.epoch}, {"loss", r.loss}};
      if (r.train_accuracy) row["train_accuracy"] = *r.train_accuracy;
      e.push_back(row);
    }
    nlohmann::json j = {{"config", config},
                        {"epochs", e},
                        {"split", split},
                        {"metrics", metrics_to_json(metrics, labels)},
                        {"wall_time_seconds", wall_time_seconds}};
    if (dev_metrics) j["dev_metrics"] = metrics_to_json(*dev_metrics, labels);
    return j;
  }
};

}  // namespace srlgnn::pipeline
