#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "srlgnn/error.hpp"
#include "srlgnn/gnn/model.hpp"

namespace srlgnn::pipeline {

enum class Precision { kF32, kF64 };

inline const char* to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f64") return Precision::kF64;
  throw ConfigError("precision must be f32 or f64, got '" + s + "'");
}

/// One training or evaluation run. Train and test splits come from
/// separate files; there is no automatic split.
struct ExperimentConfig {
  std::string corpus;       // training corpus (or the corpus to evaluate)
  std::string dev_corpus;   // optional, scored once after training
  std::string test_corpus;  // optional held-out corpus
  std::string srl;          // optional SRL annotations covering either corpus
  std::string labels = "iemocap4";
  std::size_t context_n = 0;
  std::optional<std::size_t> epochs;
  std::size_t batch_size = 8;
  double lr = 5e-6;
  ModelConfig model;
  std::uint64_t seed = 0;
  Precision precision = Precision::kF32;
  bool disable_graph = false;
  bool stop_when_fit = false;  // end training once training accuracy hits 1.0
  std::string out;             // output directory; empty writes nothing

  /// 9 for IEMOCAP-style label sets, 11 for Friends-style ones.
  std::size_t epoch_count() const {
    if (epochs) return *epochs;
    return labels.rfind("friends", 0) == 0 ? 11 : 9;
  }

  void validate() const {
    if (corpus.empty()) throw ConfigError("no corpus given");
    if (epoch_count() == 0) throw ConfigError("epochs must be at least 1");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    for (const auto* path : {&corpus, &dev_corpus, &test_corpus, &srl}) {
      if (!path->empty() && !std::filesystem::exists(*path)) throw IoError("no such file: " + *path);
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"corpus", corpus},
                        {"labels", labels},
                        {"context_n", context_n},
                        {"epochs", epoch_count()},
                        {"batch_size", batch_size},
                        {"lr", lr},
                        {"model", model.to_json()},
                        {"seed", seed},
                        {"precision", to_string(precision)},
                        {"disable_graph", disable_graph},
                        {"stop_when_fit", stop_when_fit}};
    if (!dev_corpus.empty()) j["dev_corpus"] = dev_corpus;
    if (!test_corpus.empty()) j["test_corpus"] = test_corpus;
    if (!srl.empty()) j["srl"] = srl;
    return j;
  }
};

}  // namespace srlgnn::pipeline
