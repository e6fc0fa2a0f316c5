#pragma once

#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "srlgnn/gnn/model.hpp"
#include "srlgnn/rng.hpp"
#include "srlgnn/tensor/gradcheck.hpp"

namespace srlgnn {

struct GradientReport {
  std::string name;
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[<index>] analytic <a> numeric <n>"
};

namespace detail {

inline std::string describe_worst(const std::string& name, const GradCheckResult& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "[%zu] analytic %.6g numeric %.6g", r.worst_index, r.analytic, r.numeric);
  return name + buf;
}

inline Tensor<double> seeded_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Tensor<double> t = Tensor<double>::matrix(rows, cols);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace detail

/// Finite-difference check of one binary loss (window, emotion, target)
/// against the tape gradient, reported per parameter group.
inline std::vector<GradientReport> end_to_end_gradient_check(
    SrlGnnModel<double>& model, const ContextWindow& window, const PaGraph& graph, const std::string& emotion,
    double target, const std::vector<std::pair<std::string, std::vector<std::size_t>>>& groups,
    double eps = 1e-4) {
  auto loss = [&](BoundParams<double>& bound) {
    return ops::bce_with_logits(model.forward(window, emotion, graph, bound).logit, target);
  };
  auto grads = model.params().zeros_like();
  {
    Tape<double> tape;
    BoundParams<double> bound(tape, model.params());
    auto l = loss(bound);
    tape.backward(l);
    bound.accumulate_grads(grads);
  }
  std::vector<GradientReport> out;
  for (const auto& [group, indices] : groups) {
    GradientReport report{group, 0.0, ""};
    for (std::size_t i : indices) {
      auto r = compare_with_finite_differences(
          grads[i], model.params().value(i),
          [&] {
            Tape<double> tape;
            BoundParams<double> bound(tape, model.params(), false);
            return loss(bound).value()[0];
          },
          eps);
      if (r.max_rel_error >= report.max_rel_error) {
        report.max_rel_error = r.max_rel_error;
        report.worst = detail::describe_worst(model.params().name(i), r);
      }
    }
    out.push_back(std::move(report));
  }
  return out;
}

struct GradientSuiteResult {
  std::vector<GradientReport> groups;  // end to end, per parameter group
  std::vector<GradientReport> ops;     // per tensor op
  double group_tolerance = 1e-4;
  double op_tolerance = 1e-6;

  bool passed() const {
    for (const auto& g : groups)
      if (!(g.max_rel_error < group_tolerance)) return false;
    for (const auto& o : ops)
      if (!(o.max_rel_error < op_tolerance)) return false;
    return true;
  }
};

/// Tensor ops under a random linear probe, five seeded inputs each.
inline std::vector<GradientReport> op_gradient_checks(std::uint64_t seed) {
  using V = Var<double>;
  using Op = std::function<V(Tape<double>&, V)>;
  Rng rng(seed);
  const auto other = detail::seeded_matrix(4, 3, rng, -1.0, 1.0);
  const auto gain = detail::seeded_matrix(1, 6, rng, -1.0, 1.0);
  const auto shift = detail::seeded_matrix(1, 6, rng, -1.0, 1.0);
  struct Case {
    const char* name;
    std::size_t rows, cols;
    Op op;
  };
  const std::vector<Case> cases = {
      {"matmul", 2, 4, [&](Tape<double>& t, V x) { return ops::matmul(x, t.constant(other)); }},
      {"matmul_nt", 2, 3, [&](Tape<double>& t, V x) { return ops::matmul_nt(x, t.constant(other)); }},
      {"transpose", 3, 4, [](Tape<double>&, V x) { return ops::transpose(x); }},
      {"add", 1, 3, [&](Tape<double>& t, V x) { return ops::add(t.constant(other), x); }},
      {"mul", 4, 3, [&](Tape<double>& t, V x) { return ops::mul(x, t.constant(other)); }},
      {"scale", 3, 3, [](Tape<double>&, V x) { return ops::scale(x, -2.5); }},
      {"concat", 4, 2, [&](Tape<double>& t, V x) { return ops::concat<double>({t.constant(other), x}); }},
      {"slice_cols", 3, 5, [](Tape<double>&, V x) { return ops::slice_cols(x, 1, 4); }},
      {"gather_rows", 4, 3, [](Tape<double>&, V x) { return ops::gather_rows(x, {3, 0, 3, 1}); }},
      {"row_mean", 5, 3, [](Tape<double>&, V x) { return ops::row_mean(x); }},
      {"relu", 3, 3, [](Tape<double>&, V x) { return ops::relu(x); }},
      {"tanh", 3, 3, [](Tape<double>&, V x) { return ops::tanh(x); }},
      {"sigmoid", 3, 3, [](Tape<double>&, V x) { return ops::sigmoid(x); }},
      {"softmax", 3, 4, [](Tape<double>&, V x) { return ops::softmax(x); }},
      {"normalize_sum", 1, 5, [](Tape<double>&, V x) { return ops::normalize_sum(x); }},
      {"layer_norm", 3, 6,
       [&](Tape<double>& t, V x) { return ops::layer_norm(x, t.constant(gain), t.constant(shift)); }},
      {"bce_with_logits", 1, 1, [](Tape<double>&, V x) { return ops::bce_with_logits(x, 1.0); }},
  };
  std::vector<GradientReport> out;
  for (const auto& c : cases) {
    GradientReport report{c.name, 0.0, ""};
    for (int trial = 0; trial < 5; ++trial) {
      // Positive inputs keep relu off its kink and normalize_sum away from
      // a vanishing denominator.
      auto x = detail::seeded_matrix(c.rows, c.cols, rng, 0.2, 1.5);
      Tensor<double> probe;
      const Op op = c.op;
      auto f = [&](Tape<double>& tape, V in) {
        V y = op(tape, in);
        if (probe.size() == 0) probe = detail::seeded_matrix(y.rows(), y.cols(), rng, -1.0, 1.0);
        return ops::sum(ops::mul(y, tape.constant(probe)));
      };
      auto r = grad_check<double>(f, x);
      if (r.max_rel_error >= report.max_rel_error) {
        report.max_rel_error = r.max_rel_error;
        report.worst = detail::describe_worst(std::string(c.name) + " trial " + std::to_string(trial), r);
      }
    }
    out.push_back(std::move(report));
  }
  return out;
}

/// The full suite: a three-node "I love you" graph under a small model
/// (d_lm 8, d_gcn 4), in 64-bit, checked end to end for every parameter
/// group, plus the per-op checks.
inline GradientSuiteResult run_gradient_suite(std::uint64_t seed, double eps = 1e-4) {
  const Utterance context{"u1", "A", "Say something nice", {}, "neutral"};
  const Utterance target{"u2", "B", "I love you", {}, "joy"};
  const ContextWindow window{"c", target, {context}, 1};
  const LabelSet labels(std::vector<std::string>{"joy", "neutral", "anger"});
  ModelConfig cfg;
  cfg.d_lm = 8;
  cfg.d_gcn = 4;
  cfg.n_enc_layers = 1;
  cfg.n_heads = 2;
  cfg.t_max = 32;
  cfg.seed = seed;
  auto model = SrlGnnModel<double>::create(
      cfg, Vocab::build({Conversation{"c", {context, target}}}, labels, kDefaultAuxiliary), labels);
  const std::vector<SrlFrame> frames = {SrlFrame{Span{1, 2}, {Span{0, 1}, Span{2, 3}}}};
  const auto graph = model.target_graph(window, frames);

  GradientSuiteResult result;
  result.groups = end_to_end_gradient_check(model, window, graph, "joy", 1.0, model.parameter_groups(), eps);
  result.ops = op_gradient_checks(seed);
  return result;
}

}  // namespace srlgnn
