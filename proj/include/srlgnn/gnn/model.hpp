#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "srlgnn/corpus.hpp"
#include "srlgnn/encoder/transformer.hpp"
#include "srlgnn/gnn/srl_gnn.hpp"
#include "srlgnn/tensor/checkpoint.hpp"

namespace srlgnn {

inline const char* to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }
inline const char* to_string(AttentionMode m) {
  return m == AttentionMode::kSoftmax ? "softmax" : "literal";
}
inline const char* to_string(NeighborTransform t) {
  return t == NeighborTransform::kLearned ? "learned" : "identity";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("activation must be relu or tanh, got '" + s + "'");
}
inline AttentionMode parse_attention_mode(const std::string& s) {
  if (s == "softmax") return AttentionMode::kSoftmax;
  if (s == "literal") return AttentionMode::kLiteral;
  throw ConfigError("attention_mode must be softmax or literal, got '" + s + "'");
}
inline NeighborTransform parse_neighbor_transform(const std::string& s) {
  if (s == "learned") return NeighborTransform::kLearned;
  if (s == "identity") return NeighborTransform::kIdentity;
  throw ConfigError("neighbor_transform must be learned or identity, got '" + s + "'");
}

struct ModelConfig {
  std::size_t d_lm = 64;
  std::size_t d_gcn = 32;
  std::size_t n_gcn_layers = 1;
  std::size_t n_enc_layers = 2;
  std::size_t n_heads = 2;
  std::size_t t_max = 128;
  AttentionMode attention_mode = AttentionMode::kSoftmax;
  NeighborTransform neighbor_transform = NeighborTransform::kLearned;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"d_lm", d_lm},
            {"d_gcn", d_gcn},
            {"n_gcn_layers", n_gcn_layers},
            {"n_enc_layers", n_enc_layers},
            {"n_heads", n_heads},
            {"t_max", t_max},
            {"attention_mode", to_string(attention_mode)},
            {"neighbor_transform", to_string(neighbor_transform)},
            {"activation", to_string(activation)},
            {"seed", seed}};
  }

  /// Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    ModelConfig c;
    for (const auto& [key, value] : j.items()) {
      try {
        if (key == "d_lm") c.d_lm = value.get<std::size_t>();
        else if (key == "d_gcn") c.d_gcn = value.get<std::size_t>();
        else if (key == "n_gcn_layers") c.n_gcn_layers = value.get<std::size_t>();
        else if (key == "n_enc_layers") c.n_enc_layers = value.get<std::size_t>();
        else if (key == "n_heads") c.n_heads = value.get<std::size_t>();
        else if (key == "t_max") c.t_max = value.get<std::size_t>();
        else if (key == "attention_mode") c.attention_mode = parse_attention_mode(value.get<std::string>());
        else if (key == "neighbor_transform") c.neighbor_transform = parse_neighbor_transform(value.get<std::string>());
        else if (key == "activation") c.activation = parse_activation(value.get<std::string>());
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else throw ConfigError("unknown model config key '" + key + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model config field '" + key + "': " + e.what());
      }
    }
    if (c.d_lm == 0 || c.d_gcn == 0 || c.n_heads == 0) throw ConfigError("model dimensions must be positive");
    return c;
  }

  static ModelConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model config " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
  }

  /// Name of the first field on which the two configs differ. The seed is
  /// ignored: it only affects initialization.
  std::optional<std::string> first_difference(const ModelConfig& other) const {
    auto a = to_json();
    auto b = other.to_json();
    for (const auto& [key, value] : a.items()) {
      if (key != "seed" && b.at(key) != value) return key;
    }
    return std::nullopt;
  }
};

/// Output of classifying one utterance against every emotion.
struct ClassifierOutput {
  std::vector<double> logits;               // label order
  std::size_t predicted = 0;                // label ordinal
  std::vector<std::vector<double>> alphas;  // per label, per node
};

/// Highest logit; ties go to the lowest ordinal.
inline std::size_t argmax_label(const std::vector<double>& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

/// Encoder + SRL-GNN + binary head, sharing every parameter across the E
/// one-vs-all decisions.
template <typename T>
class SrlGnnModel {
 public:
  struct Forward {
    Var<T> logit;
    Tensor<T> alpha;
  };

  static SrlGnnModel create(const ModelConfig& cfg, Vocab vocab, LabelSet labels) {
    SrlGnnModel m(cfg, std::move(vocab), std::move(labels));
    Rng rng(cfg.seed);
    m.encoder_.register_params(m.params_, rng);
    auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
      const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
      return m.params_.add(name, Tensor<T>::uniform({in, out}, bound, rng));
    };
    weight("gnn.w_init", cfg.d_lm, cfg.d_gcn);
    for (std::size_t l = 0; l < cfg.n_gcn_layers; ++l) {
      const std::string p = "gnn.layer" + std::to_string(l);
      if (cfg.neighbor_transform == NeighborTransform::kLearned) weight(p + ".v", cfg.d_gcn, cfg.d_gcn);
      weight(p + ".w", cfg.d_gcn, cfg.d_gcn);
    }
    weight("gnn.w_att", cfg.d_gcn, cfg.d_lm);
    weight("head.w", cfg.d_lm + cfg.d_gcn, 1);
    const T head_bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg.d_lm + cfg.d_gcn)));
    m.params_.add("head.b", Tensor<T>::uniform({1, 1}, head_bound, rng));
    m.attach();
    return m;
  }

  static SrlGnnModel from_checkpoint(const Checkpoint<T>& ck) {
    const auto& h = ck.header;
    if (!h.contains("model_config") || !h.contains("labels") || !h.contains("vocab")) {
      throw ParseError("checkpoint lacks model_config/labels/vocab");
    }
    SrlGnnModel m(ModelConfig::from_json(h.at("model_config")),
                  Vocab(h.at("vocab").template get<std::vector<std::string>>()),
                  LabelSet(h.at("labels").template get<std::vector<std::string>>()));
    if (h.contains("auxiliary")) m.auxiliary_ = h.at("auxiliary").template get<std::string>();
    m.params_ = ck.params;
    m.encoder_.attach(m.params_);
    m.attach();
    return m;
  }

  static SrlGnnModel load(const std::string& path) { return from_checkpoint(load_checkpoint<T>(path)); }

  void save(const std::string& path) const { save_checkpoint(path, params_, header()); }

  nlohmann::json header() const {
    return {{"model_config", cfg_.to_json()},
            {"labels", labels_.labels()},
            {"vocab", vocab_.words()},
            {"auxiliary", auxiliary_}};
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  void set_attention_mode(AttentionMode mode) noexcept { cfg_.attention_mode = mode; }
  const Vocab& vocab() const noexcept { return vocab_; }
  const LabelSet& labels() const noexcept { return labels_; }
  const std::string& auxiliary_template() const noexcept { return auxiliary_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }
  const TransformerEncoder<T>& encoder() const noexcept { return encoder_; }

  InputSequence input_for(const ContextWindow& window, const std::string& emotion) const {
    return build_input(window, emotion, vocab_, cfg_.t_max, auxiliary_);
  }

  /// Graph of the target utterance, adjusted for any target tokens the
  /// input assembly cut from the front.
  static PaGraph graph_for(const PaGraph& full, const InputSequence& seq) {
    return drop_leading_tokens(full, seq.target_tokens_dropped);
  }

  /// GNN and head on top of an already encoded sequence.
  Forward head_forward(const EncodedSequence<T>& enc, const PaGraph& graph, const Span& target_span,
                       BoundParams<T>& params) const {
    Var<T> h = init_nodes(graph, enc, target_span, params[w_init_], cfg_.activation);
    for (const auto& layer : layers_) {
      std::optional<Var<T>> v;
      if (layer.v) v = params[*layer.v];
      h = gcn_layer(h, graph, v, params[layer.w], cfg_.activation);
    }
    Readout<T> r = attention_readout(h, enc.cls_embedding, params[w_att_], cfg_.attention_mode,
                                     cfg_.activation);
    return {binary_head(enc.cls_embedding, r.graph_embedding, params[head_w_], params[head_b_]),
            r.alpha.value()};
  }

  /// Logit for one (window, emotion) pair. `full_graph` is the graph of the
  /// untruncated target utterance.
  Forward forward(const ContextWindow& window, const std::string& emotion, const PaGraph& full_graph,
                  BoundParams<T>& params) const {
    const InputSequence seq = input_for(window, emotion);
    const EncodedSequence<T> enc = encoder_.encode(seq, params);
    return head_forward(enc, graph_for(full_graph, seq), seq.target_span, params);
  }

  PaGraph target_graph(const ContextWindow& window, std::span<const SrlFrame> frames) const {
    return build_graph(frames, tokenize(window.target.text).size());
  }

  ClassifierOutput classify(const ContextWindow& window, std::span<const SrlFrame> frames) const {
    return classify_graph(window, target_graph(window, frames));
  }

  /// Same as `classify` for a graph already built over the target.
  ClassifierOutput classify_graph(const ContextWindow& window, const PaGraph& graph) const {
    ClassifierOutput out;
    for (const auto& emotion : labels_.labels()) {
      Tape<T> tape;
      BoundParams<T> bound(tape, params_, /*track=*/false);
      Forward f = forward(window, emotion, graph, bound);
      out.logits.push_back(static_cast<double>(f.logit.value()[0]));
      out.alphas.emplace_back(f.alpha.values().begin(), f.alpha.values().end());
    }
    out.predicted = argmax_label(out.logits);
    return out;
  }

  /// Store indices of each trainable group checked end to end: the
  /// encoder's embedding tables, the node projection, the per-layer
  /// neighbour and self transforms, the attention scorer and the head.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_groups() const {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups = {
        {"encoder_embeddings", {params_.index("enc.tok_embed"), params_.index("enc.seg_embed")}},
        {"w_init", {w_init_}}};
    std::vector<std::size_t> v, w;
    for (const auto& layer : layers_) {
      if (layer.v) v.push_back(*layer.v);
      w.push_back(layer.w);
    }
    if (!v.empty()) groups.emplace_back("v", v);
    groups.emplace_back("w", w);
    groups.emplace_back("w_att", std::vector<std::size_t>{w_att_});
    groups.emplace_back("head", std::vector<std::size_t>{head_w_, head_b_});
    return groups;
  }

 private:
  SrlGnnModel(const ModelConfig& cfg, Vocab vocab, LabelSet labels)
      : cfg_(cfg),
        vocab_(std::move(vocab)),
        labels_(std::move(labels)),
        encoder_(EncoderConfig{vocab_.size(), cfg.d_lm, cfg.n_enc_layers, cfg.n_heads, 4, cfg.t_max}) {}

  void attach() {
    w_init_ = params_.index("gnn.w_init");
    layers_.clear();
    for (std::size_t l = 0; l < cfg_.n_gcn_layers; ++l) {
      const std::string p = "gnn.layer" + std::to_string(l);
      Layer layer;
      if (cfg_.neighbor_transform == NeighborTransform::kLearned) layer.v = params_.index(p + ".v");
      layer.w = params_.index(p + ".w");
      layers_.push_back(layer);
    }
    w_att_ = params_.index("gnn.w_att");
    head_w_ = params_.index("head.w");
    head_b_ = params_.index("head.b");
  }

  struct Layer {
    std::optional<std::size_t> v;
    std::size_t w = 0;
  };

  ModelConfig cfg_;
  Vocab vocab_;
  LabelSet labels_;
  std::string auxiliary_ = kDefaultAuxiliary;
  ParamStore<T> params_;
  TransformerEncoder<T> encoder_;
  std::size_t w_init_ = 0, w_att_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<Layer> layers_;
};

}  // namespace srlgnn
