#pragma once

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>
#include <string>
#include <vector>

#include "srlgnn/encoder/input.hpp"
#include "srlgnn/tensor/ops.hpp"
#include "srlgnn/tensor/params.hpp"

namespace srlgnn {

/// Per-token contextual embeddings; `cls_embedding` is row 0 of
/// `token_embeddings` as its own [1 x d] value.
template <typename T>
struct EncodedSequence {
  Var<T> token_embeddings;
  Var<T> cls_embedding;
};

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ff_multiplier = 4;
  std::size_t t_max = 128;
};

/// Sinusoidal position table [rows x d].
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t rows, std::size_t d) {
  Tensor<T> pe = Tensor<T>::matrix(rows, d);
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) / rate;
      pe(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

/// Small pre-norm transformer encoder. Parameters live in a shared
/// ParamStore under the "enc." prefix; this object only remembers where.
template <typename T>
class TransformerEncoder {
 public:
  TransformerEncoder() = default;

  TransformerEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
    if (cfg.n_heads == 0 || cfg.d_model % cfg.n_heads != 0) {
      throw ConfigError("d_lm (" + std::to_string(cfg.d_model) + ") must be divisible by n_heads (" +
                        std::to_string(cfg.n_heads) + ")");
    }
    positions_ = sinusoidal_positions<T>(cfg.t_max, cfg.d_model);
  }

  const EncoderConfig& config() const noexcept { return cfg_; }

  /// Adds freshly initialized parameters to `store`. Weights are uniform in
  /// +-1/sqrt(fan_in); embedding rows count as fan_in 1; layer-norm gains
  /// start at 1 and offsets at 0.
  void register_params(ParamStore<T>& store, Rng& rng) {
    const std::size_t d = cfg_.d_model, ff = cfg_.ff_multiplier * d;
    auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
      const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
      return store.add(name, Tensor<T>::uniform({in, out}, bound, rng));
    };
    auto bias = [&](const std::string& name, std::size_t fan_in, std::size_t out) {
      const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(fan_in)));
      return store.add(name, Tensor<T>::uniform({1, out}, bound, rng));
    };
    auto norm = [&](const std::string& prefix) {
      return std::pair{store.add(prefix + ".gain", Tensor<T>({1, d}, T(1))),
                       store.add(prefix + ".bias", Tensor<T>({1, d}, T(0)))};
    };
    token_embed_ = store.add("enc.tok_embed", Tensor<T>::uniform({cfg_.vocab_size, d}, T(1), rng));
    segment_embed_ = store.add("enc.seg_embed", Tensor<T>::uniform({2, d}, T(1), rng));
    blocks_.clear();
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "enc.block" + std::to_string(l);
      Block b;
      std::tie(b.ln1_gain, b.ln1_bias) = norm(p + ".ln1");
      b.wq = weight(p + ".attn.wq", d, d);
      b.bq = bias(p + ".attn.bq", d, d);
      b.wk = weight(p + ".attn.wk", d, d);
      b.bk = bias(p + ".attn.bk", d, d);
      b.wv = weight(p + ".attn.wv", d, d);
      b.bv = bias(p + ".attn.bv", d, d);
      b.wo = weight(p + ".attn.wo", d, d);
      b.bo = bias(p + ".attn.bo", d, d);
      std::tie(b.ln2_gain, b.ln2_bias) = norm(p + ".ln2");
      b.w1 = weight(p + ".ffn.w1", d, ff);
      b.b1 = bias(p + ".ffn.b1", d, ff);
      b.w2 = weight(p + ".ffn.w2", ff, d);
      b.b2 = bias(p + ".ffn.b2", ff, d);
      blocks_.push_back(b);
    }
    std::tie(final_gain_, final_bias_) = norm("enc.ln_final");
  }

  /// Re-attaches to parameters already present in `store` (after loading a
  /// checkpoint).
  void attach(const ParamStore<T>& store) {
    token_embed_ = store.index("enc.tok_embed");
    segment_embed_ = store.index("enc.seg_embed");
    blocks_.clear();
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "enc.block" + std::to_string(l);
      Block b;
      b.ln1_gain = store.index(p + ".ln1.gain");
      b.ln1_bias = store.index(p + ".ln1.bias");
      b.wq = store.index(p + ".attn.wq");
      b.bq = store.index(p + ".attn.bq");
      b.wk = store.index(p + ".attn.wk");
      b.bk = store.index(p + ".attn.bk");
      b.wv = store.index(p + ".attn.wv");
      b.bv = store.index(p + ".attn.bv");
      b.wo = store.index(p + ".attn.wo");
      b.bo = store.index(p + ".attn.bo");
      b.ln2_gain = store.index(p + ".ln2.gain");
      b.ln2_bias = store.index(p + ".ln2.bias");
      b.w1 = store.index(p + ".ffn.w1");
      b.b1 = store.index(p + ".ffn.b1");
      b.w2 = store.index(p + ".ffn.w2");
      b.b2 = store.index(p + ".ffn.b2");
      blocks_.push_back(b);
    }
    final_gain_ = store.index("enc.ln_final.gain");
    final_bias_ = store.index("enc.ln_final.bias");
    if (store.value(token_embed_).rows() != cfg_.vocab_size) {
      throw ConfigError("checkpoint token table has " +
                        std::to_string(store.value(token_embed_).rows()) + " rows, vocab has " +
                        std::to_string(cfg_.vocab_size));
    }
  }

  /// Runs the encoder. When `attention` is given, every head's attention
  /// matrix is appended to it (layer-major).
  EncodedSequence<T> encode(const InputSequence& seq, BoundParams<T>& params,
                            std::vector<Tensor<T>>* attention = nullptr) const {
    const std::size_t n = seq.size();
    if (n > cfg_.t_max) {
      throw ValidationError("sequence of " + std::to_string(n) + " tokens exceeds t_max " +
                            std::to_string(cfg_.t_max));
    }
    for (std::size_t id : seq.token_ids) {
      if (id >= cfg_.vocab_size) throw ValidationError("token id " + std::to_string(id) + " outside vocab");
    }
    auto& tape = params.tape();
    const std::size_t d = cfg_.d_model;
    Tensor<T> pos = Tensor<T>::matrix(n, d);
    std::copy_n(positions_.data(), n * d, pos.data());

    Var<T> x = ops::add(ops::gather_rows(params[token_embed_], seq.token_ids),
                        ops::gather_rows(params[segment_embed_], seq.segment_ids));
    x = ops::add(x, tape.constant(std::move(pos)));

    const std::size_t dh = d / cfg_.n_heads;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (const auto& b : blocks_) {
      Var<T> h = ops::layer_norm(x, params[b.ln1_gain], params[b.ln1_bias]);
      Var<T> q = ops::add(ops::matmul(h, params[b.wq]), params[b.bq]);
      Var<T> k = ops::add(ops::matmul(h, params[b.wk]), params[b.bk]);
      Var<T> v = ops::add(ops::matmul(h, params[b.wv]), params[b.bv]);
      std::vector<Var<T>> heads;
      for (std::size_t head = 0; head < cfg_.n_heads; ++head) {
        const std::size_t lo = head * dh, hi = lo + dh;
        Var<T> scores =
            ops::scale(ops::matmul_nt(ops::slice_cols(q, lo, hi), ops::slice_cols(k, lo, hi)), inv_sqrt);
        Var<T> weights = ops::softmax(scores);
        if (attention) attention->push_back(weights.value());
        heads.push_back(ops::matmul(weights, ops::slice_cols(v, lo, hi)));
      }
      Var<T> attn = ops::add(ops::matmul(ops::concat(heads), params[b.wo]), params[b.bo]);
      x = ops::add(x, attn);

      Var<T> h2 = ops::layer_norm(x, params[b.ln2_gain], params[b.ln2_bias]);
      Var<T> ff = ops::relu(ops::add(ops::matmul(h2, params[b.w1]), params[b.b1]));
      x = ops::add(x, ops::add(ops::matmul(ff, params[b.w2]), params[b.b2]));
    }
    x = ops::layer_norm(x, params[final_gain_], params[final_bias_]);
    return {x, ops::gather_rows(x, {0})};
  }

 private:
  struct Block {
    std::size_t ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln2_gain, ln2_bias, w1, b1, w2, b2;
  };

  EncoderConfig cfg_;
  Tensor<T> positions_;
  std::size_t token_embed_ = 0, segment_embed_ = 0, final_gain_ = 0, final_bias_ = 0;
  std::vector<Block> blocks_;
};

}  // namespace srlgnn
