#pragma once

#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "srlgnn/encoder/transformer.hpp"
#include "srlgnn/srl_graph.hpp"
#include "srlgnn/tensor/ops.hpp"

namespace srlgnn {

enum class Activation { kRelu, kTanh };
enum class AttentionMode { kSoftmax, kLiteral };
enum class NeighborTransform { kLearned, kIdentity };

template <typename T>
Var<T> activate(Var<T> x, Activation act) {
  return act == Activation::kRelu ? ops::relu(x) : ops::tanh(x);
}

/// Node initialization: row i is act(mean of the encoder rows covered by
/// node i's span, projected by `w_init` [d_lm x d_gcn]). Node spans are
/// relative to the target utterance and are offset by `target_span.start`.
template <typename T>
Var<T> init_nodes(const PaGraph& graph, const EncodedSequence<T>& enc, const Span& target_span,
                  Var<T> w_init, Activation act = Activation::kRelu) {
  Tape<T>& tape = *w_init.tape;
  const std::size_t seq_len = enc.token_embeddings.rows();
  Tensor<T> averaging = Tensor<T>::matrix(graph.nodes.size(), seq_len);
  for (const auto& node : graph.nodes) {
    const Span abs{node.span.start + target_span.start, node.span.end + target_span.start};
    if (abs.start >= abs.end || abs.end > target_span.end || abs.start < target_span.start) {
      throw ValidationError("node span " + node.span.str() + " escapes target span " +
                            target_span.str());
    }
    const T w = T(1) / static_cast<T>(abs.size());
    for (std::size_t p = abs.start; p < abs.end; ++p) averaging(node.id, p) = w;
  }
  Var<T> pooled = ops::matmul(tape.constant(std::move(averaging)), enc.token_embeddings);
  return activate(ops::matmul(pooled, w_init), act);
}

/// Row i holds 1/|N_i| at each neighbour column; isolated rows stay zero.
template <typename T>
Tensor<T> neighbor_mean_matrix(const PaGraph& graph) {
  const std::size_t n = graph.nodes.size();
  Tensor<T> a = Tensor<T>::matrix(n, n);
  const auto adj = graph.adjacency();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : adj[i]) a(i, j) = T(1) / static_cast<T>(adj[i].size());
  }
  return a;
}

/// One propagation step: z_i = mean over neighbours j of h_j V (the
/// transform is skipped when `neighbor` is empty), then
/// h_i' = act(h_i W + z_i).
template <typename T>
Var<T> gcn_layer(Var<T> h, const PaGraph& graph, std::type_identity_t<std::optional<Var<T>>> neighbor,
                 Var<T> self,
                 Activation act = Activation::kRelu) {
  if (h.rows() != graph.nodes.size()) {
    throw ShapeError("gcn_layer: " + std::to_string(h.rows()) + " embedding rows for " +
                     std::to_string(graph.nodes.size()) + " nodes");
  }
  Tape<T>& tape = *h.tape;
  Var<T> messages = neighbor ? ops::matmul(h, *neighbor) : h;
  Var<T> z = ops::matmul(tape.constant(neighbor_mean_matrix<T>(graph)), messages);
  return activate(ops::add(ops::matmul(h, self), z), act);
}

template <typename T>
struct Readout {
  Var<T> alpha;            // [1 x n_nodes]
  Var<T> graph_embedding;  // [1 x d_gcn]
};

/// Multiplicative attention of the [CLS] vector over final node states:
/// score_i = cls . act(h_i W_1), normalized over all nodes either by
/// softmax or by the plain ratio score_i / sum_j score_j; the graph vector
/// is the alpha-weighted sum of node rows. An empty graph yields an empty
/// alpha and a zero graph vector.
template <typename T>
Readout<T> attention_readout(Var<T> h_final, Var<T> cls, Var<T> w_att,
                             AttentionMode mode = AttentionMode::kSoftmax,
                             Activation act = Activation::kRelu) {
  Tape<T>& tape = *cls.tape;
  const std::size_t n = h_final.rows();
  if (n == 0) {
    return {tape.constant(Tensor<T>::matrix(1, 0)),
            tape.constant(Tensor<T>::matrix(1, h_final.cols()))};
  }
  if (w_att.cols() != cls.cols()) {
    throw ShapeError("attention_readout: scorer maps to " + std::to_string(w_att.cols()) +
                     " dims but [CLS] has " + std::to_string(cls.cols()));
  }
  Var<T> keys = activate(ops::matmul(h_final, w_att), act);          // [n x d_lm]
  Var<T> scores = ops::transpose(ops::matmul_nt(keys, cls));         // [1 x n]
  Var<T> alpha = mode == AttentionMode::kSoftmax ? ops::softmax(scores) : ops::normalize_sum(scores);
  return {alpha, ops::matmul(alpha, h_final)};
}

/// logit = [cls ; graph] w + b, with w [(d_lm + d_gcn) x 1] and b [1 x 1].
template <typename T>
Var<T> binary_head(Var<T> cls, Var<T> graph, Var<T> weight, Var<T> bias) {
  if (weight.rows() != cls.cols() + graph.cols() || weight.cols() != 1) {
    throw ShapeError("binary_head: weight " + shape_string(weight.shape()) + " for inputs of " +
                     std::to_string(cls.cols()) + " + " + std::to_string(graph.cols()) + " dims");
  }
  return ops::add(ops::matmul(ops::concat<T>({cls, graph}), weight), bias);
}

}  // namespace srlgnn
