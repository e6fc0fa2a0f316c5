// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "srlgnn/gnn/gradient_suite.hpp"
#include "srlgnn/pipeline/run.hpp"

namespace {

using namespace srlgnn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Matrix = std::vector<std::vector<double>>;

const std::string kData = SRLGNN_TEST_DATA;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, std::vector<double>(cols));
  for (auto& row : m)
    for (auto& v : row) v = rng.uniform(lo, hi);
  return m;
}

Tensor<double> to_tensor(const Matrix& m) {
  Tensor<double> t = Tensor<double>::matrix(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t(i, j) = m[i][j];
  return t;
}

double max_abs_diff(const Tensor<double>& got, const Matrix& want) {
  double worst = 0.0;
  if (got.rows() != want.size()) return INFINITY;
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (got.cols() != want[i].size()) return INFINITY;
    for (std::size_t j = 0; j < want[i].size(); ++j) worst = std::max(worst, std::abs(got(i, j) - want[i][j]));
  }
  return worst;
}

Span random_span(std::size_t token_count, Rng& rng) {
  const std::size_t a = rng.below(token_count);
  const std::size_t b = a + 1 + rng.below(token_count - a);
  return Span{a, b};
}

std::vector<SrlFrame> random_frames(std::size_t token_count, std::size_t max_frames, Rng& rng) {
  std::vector<SrlFrame> frames(rng.below(max_frames + 1));
  for (auto& f : frames) {
    f.predicate = random_span(token_count, rng);
    f.arguments.resize(rng.below(4));
    for (auto& a : f.arguments) a = random_span(token_count, rng);
  }
  return frames;
}

// ---------------------------------------------------------------------------
// 1. Graph builder against an all-pairs oracle.

Verdict graph_oracle() {
  Verdict v;
  Rng rng(1);
  const auto t0 = Clock::now();
  std::size_t nodes_seen = 0, edges_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t tokens = 1 + rng.below(12);
    const auto frames = random_frames(tokens, 5, rng);

    std::set<Span> spans, predicates;
    for (const auto& f : frames) {
      spans.insert(f.predicate);
      predicates.insert(f.predicate);
      for (const auto& a : f.arguments) spans.insert(a);
    }
    auto related = [&](const Span& x, const Span& y) {
      if (x == y) return false;
      for (const auto& f : frames) {
        for (const auto& a : f.arguments) {
          if ((f.predicate == x && a == y) || (f.predicate == y && a == x)) return true;
        }
      }
      auto inside = [](const Span& s, const Span& t) {
        return t.start <= s.start && s.end <= t.end && !(s == t);
      };
      return inside(x, y) || inside(y, x);
    };
    std::set<std::pair<Span, Span>> want;
    for (const auto& x : spans)
      for (const auto& y : spans)
        if (x < y && related(x, y)) want.insert({x, y});

    const auto g = build_graph(frames, tokens);
    std::set<std::pair<Span, Span>> got;
    for (const auto& [a, b] : g.edges) {
      Span x = g.nodes[a].span, y = g.nodes[b].span;
      got.insert(x < y ? std::pair{x, y} : std::pair{y, x});
    }
    std::set<Span> got_spans, got_predicates;
    for (const auto& n : g.nodes) {
      got_spans.insert(n.span);
      if (n.kind == NodeKind::kPredicate) got_predicates.insert(n.span);
    }
    if (got != want || got_spans != spans || got_predicates != predicates || g.nodes.size() != spans.size()) {
      v.fail("trial " + std::to_string(trial) + " differs from the oracle");
    }
    nodes_seen += spans.size();
    edges_seen += want.size();
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 10.0) v.fail("took " + fmt(elapsed) + " s");
  if (v.pass) {
    v.detail = "1000 frame sets, " + std::to_string(nodes_seen) + " nodes, " + std::to_string(edges_seen) +
               " edges identical, " + fmt(elapsed) + " s";
  }
  return v;
}

// ---------------------------------------------------------------------------
// 2. Graph layers against scalar loops.

double act(double x, Activation a) { return a == Activation::kRelu ? std::max(0.0, x) : std::tanh(x); }

Matrix oracle_init(const PaGraph& g, const Matrix& enc, std::size_t offset, const Matrix& w, Activation a) {
  Matrix out;
  for (const auto& node : g.nodes) {
    std::vector<double> pooled(enc[0].size(), 0.0);
    for (std::size_t p = node.span.start; p < node.span.end; ++p)
      for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] += enc[p + offset][k];
    for (auto& x : pooled) x /= static_cast<double>(node.span.size());
    std::vector<double> row(w[0].size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) {
      for (std::size_t k = 0; k < pooled.size(); ++k) row[j] += pooled[k] * w[k][j];
      row[j] = act(row[j], a);
    }
    out.push_back(row);
  }
  return out;
}

Matrix oracle_gcn(const PaGraph& g, const Matrix& h, const Matrix* v, const Matrix& w, Activation a) {
  const std::size_t n = h.size(), d = w[0].size();
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && g.has_edge(i, j)) nbrs[i].push_back(j);
  Matrix out(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double self = 0.0, z = 0.0;
      for (std::size_t m = 0; m < h[i].size(); ++m) self += h[i][m] * w[m][k];
      for (std::size_t j : nbrs[i]) {
        if (v) {
          for (std::size_t m = 0; m < h[j].size(); ++m) z += h[j][m] * (*v)[m][k];
        } else {
          z += h[j][k];
        }
      }
      if (!nbrs[i].empty()) z /= static_cast<double>(nbrs[i].size());
      out[i][k] = act(self + z, a);
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> oracle_readout(const Matrix& h, const std::vector<double>& cls,
                                                                   const Matrix& w_att, AttentionMode mode,
                                                                   Activation a) {
  std::vector<double> scores;
  for (const auto& row : h) {
    double s = 0.0;
    for (std::size_t k = 0; k < cls.size(); ++k) {
      double key = 0.0;
      for (std::size_t m = 0; m < row.size(); ++m) key += row[m] * w_att[m][k];
      s += cls[k] * act(key, a);
    }
    scores.push_back(s);
  }
  std::vector<double> alpha(scores.size());
  if (mode == AttentionMode::kSoftmax) {
    const double top = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - top);
    for (std::size_t i = 0; i < scores.size(); ++i) alpha[i] = std::exp(scores[i] - top) / z;
  } else {
    const double z = std::accumulate(scores.begin(), scores.end(), 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) alpha[i] = scores[i] / z;
  }
  std::vector<double> graph(h[0].size(), 0.0);
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t k = 0; k < graph.size(); ++k) graph[k] += alpha[i] * h[i][k];
  return {alpha, graph};
}

PaGraph random_graph(Rng& rng, std::size_t tokens, bool non_empty) {
  for (;;) {
    auto g = build_graph(random_frames(tokens, 4, rng), tokens);
    if (!non_empty || !g.nodes.empty()) return g;
  }
}

Verdict layer_fidelity() {
  Verdict v;
  Rng rng(2);
  double worst[4] = {0, 0, 0, 0};
  for (int fixture = 0; fixture < 100; ++fixture) {
    const std::size_t d_lm = 2 + rng.below(7), d_gcn = 2 + rng.below(6);
    const std::size_t tokens = 1 + rng.below(10), offset = rng.below(6), seq = offset + tokens + 1 + rng.below(4);
    const Activation a = fixture % 2 ? Activation::kTanh : Activation::kRelu;
    // The ratio normalization needs scores of one sign, so those fixtures
    // draw every input from a positive range.
    const AttentionMode mode = fixture % 3 == 2 ? AttentionMode::kLiteral : AttentionMode::kSoftmax;
    const double lo = mode == AttentionMode::kLiteral ? 0.05 : -1.0;
    const bool learned = fixture % 4 != 3;
    const PaGraph g = random_graph(rng, tokens, true);
    const Matrix enc = random_matrix(seq, d_lm, rng, lo, 1.0);
    const Matrix w_init = random_matrix(d_lm, d_gcn, rng, lo, 1.0);
    const Matrix v_mat = random_matrix(d_gcn, d_gcn, rng, lo, 1.0);
    const Matrix w_mat = random_matrix(d_gcn, d_gcn, rng, lo, 1.0);
    const Matrix w_att = random_matrix(d_gcn, d_lm, rng, lo, 1.0);
    const Matrix head_w = random_matrix(d_lm + d_gcn, 1, rng);
    const double head_b = rng.uniform(-1.0, 1.0);

    Tape<double> tape;
    const EncodedSequence<double> encoded{tape.constant(to_tensor(enc)), tape.constant(to_tensor({enc[0]}))};
    const Span target{offset, offset + tokens};
    auto h0 = init_nodes(g, encoded, target, tape.constant(to_tensor(w_init)), a);
    const Matrix want_h0 = oracle_init(g, enc, offset, w_init, a);
    worst[0] = std::max(worst[0], max_abs_diff(h0.value(), want_h0));

    std::optional<Var<double>> neighbor;
    if (learned) neighbor = tape.constant(to_tensor(v_mat));
    auto h1 = gcn_layer(tape.constant(to_tensor(want_h0)), g, neighbor, tape.constant(to_tensor(w_mat)), a);
    const Matrix want_h1 = oracle_gcn(g, want_h0, learned ? &v_mat : nullptr, w_mat, a);
    worst[1] = std::max(worst[1], max_abs_diff(h1.value(), want_h1));

    auto r = attention_readout(tape.constant(to_tensor(want_h1)), encoded.cls_embedding,
                               tape.constant(to_tensor(w_att)), mode, a);
    const auto [alpha, graph] = oracle_readout(want_h1, enc[0], w_att, mode, a);
    worst[2] = std::max({worst[2], max_abs_diff(r.alpha.value(), {alpha}),
                         max_abs_diff(r.graph_embedding.value(), {graph})});

    auto logit = binary_head(encoded.cls_embedding, tape.constant(to_tensor({graph})),
                             tape.constant(to_tensor(head_w)), tape.constant(to_tensor({{head_b}})));
    double want_logit = head_b;
    for (std::size_t k = 0; k < d_lm; ++k) want_logit += enc[0][k] * head_w[k][0];
    for (std::size_t k = 0; k < d_gcn; ++k) want_logit += graph[k] * head_w[d_lm + k][0];
    worst[3] = std::max(worst[3], std::abs(logit.value()[0] - want_logit));
  }
  const char* names[] = {"init_nodes", "gcn_layer", "attention_readout", "binary_head"};
  std::string detail = "100 fixtures, max abs error";
  for (int i = 0; i < 4; ++i) {
    detail += std::string(i ? ", " : " ") + names[i] + " " + fmt(worst[i]);
    if (!(worst[i] <= 1e-6)) v.fail(std::string(names[i]) + " error " + fmt(worst[i]) + " > 1e-6");
  }
  if (v.pass) v.detail = detail;
  return v;
}

// ---------------------------------------------------------------------------
// 3. Gradients.

Verdict gradient_integrity() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto suite = run_gradient_suite(7, 1e-4);
  const double elapsed = seconds_since(t0);
  double worst_group = 0.0, worst_op = 0.0;
  for (const auto& g : suite.groups) {
    worst_group = std::max(worst_group, g.max_rel_error);
    if (!(g.max_rel_error < 1e-4)) v.fail("group " + g.name + " " + fmt(g.max_rel_error) + " at " + g.worst);
  }
  for (const auto& o : suite.ops) {
    worst_op = std::max(worst_op, o.max_rel_error);
    if (!(o.max_rel_error < 1e-6)) v.fail("op " + o.name + " " + fmt(o.max_rel_error) + " at " + o.worst);
  }
  if (suite.groups.size() < 5) v.fail("only " + std::to_string(suite.groups.size()) + " parameter groups");
  if (elapsed >= 60.0) v.fail("took " + fmt(elapsed) + " s");
  if (v.pass) {
    v.detail = std::to_string(suite.groups.size()) + " groups max " + fmt(worst_group) + ", " +
               std::to_string(suite.ops.size()) + " ops max " + fmt(worst_op) + ", " + fmt(elapsed) + " s";
  }
  return v;
}

// ---------------------------------------------------------------------------
// 4. Attention contract.

Verdict attention_contract() {
  Verdict v;
  Rng rng(4);
  double worst_sum = 0.0, worst_single = 0.0, worst_perm = 0.0;
  for (int trial = 0; trial < 400; ++trial) {
    const AttentionMode mode = trial % 2 ? AttentionMode::kLiteral : AttentionMode::kSoftmax;
    const double lo = mode == AttentionMode::kLiteral ? 0.05 : -1.0;
    const std::size_t n = trial % 10 == 0 ? 1 : 1 + rng.below(8), d_gcn = 2 + rng.below(5), d_lm = 2 + rng.below(6);
    const Matrix h = random_matrix(n, d_gcn, rng, lo, 1.0);
    const Matrix cls = random_matrix(1, d_lm, rng, lo, 1.0);
    const Matrix w_att = random_matrix(d_gcn, d_lm, rng, lo, 1.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix permuted(n);
    for (std::size_t i = 0; i < n; ++i) permuted[i] = h[perm[i]];

    Tape<double> tape;
    auto r = attention_readout(tape.constant(to_tensor(h)), tape.constant(to_tensor(cls)),
                               tape.constant(to_tensor(w_att)), mode);
    auto rp = attention_readout(tape.constant(to_tensor(permuted)), tape.constant(to_tensor(cls)),
                                tape.constant(to_tensor(w_att)), mode);
    const auto& alpha = r.alpha.value();
    double sum = 0.0;
    for (double a : alpha.values()) sum += a;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    if (n == 1) worst_single = std::max(worst_single, std::abs(alpha[0] - 1.0));
    for (std::size_t i = 0; i < n; ++i) worst_perm = std::max(worst_perm, std::abs(rp.alpha.value()[i] - alpha[perm[i]]));
    for (std::size_t k = 0; k < d_gcn; ++k) {
      worst_perm = std::max(worst_perm, std::abs(rp.graph_embedding.value()[k] - r.graph_embedding.value()[k]));
    }
  }
  if (!(worst_sum <= 1e-6)) v.fail("alpha sums off by " + fmt(worst_sum));
  if (!(worst_single <= 1e-12)) v.fail("single-node alpha off by " + fmt(worst_single));
  if (!(worst_perm <= 1e-6)) v.fail("permutation changes outputs by " + fmt(worst_perm));
  if (v.pass) {
    v.detail = "400 graphs in both modes; |sum-1| " + fmt(worst_sum) + ", single node " + fmt(worst_single) +
               ", permutation " + fmt(worst_perm);
  }
  return v;
}

// ---------------------------------------------------------------------------
// 5. Overfitting the fixture.

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("srlgnn_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

pipeline::ExperimentConfig fixture_config() {
  pipeline::ExperimentConfig cfg;
  cfg.corpus = kData + "/fixture16.jsonl";
  cfg.srl = kData + "/fixture16_srl.json";
  cfg.labels = "iemocap4";
  cfg.model.d_lm = 64;
  cfg.model.d_gcn = 32;
  cfg.seed = 7;
  return cfg;
}

Verdict overfit() {
  Verdict v;
  auto cfg = fixture_config();
  cfg.lr = 1e-3;
  cfg.epochs = 500;
  cfg.stop_when_fit = true;
  std::ostringstream log;
  const auto t0 = Clock::now();
  const auto report = pipeline::train<float>(cfg, log).report;
  const double elapsed = seconds_since(t0);
  const double accuracy = report.metrics.weighted_accuracy;
  if (accuracy != 1.0) v.fail("training accuracy " + fmt(accuracy) + " after " + std::to_string(report.epochs.size()) + " epochs");
  if (elapsed >= 300.0) v.fail("took " + fmt(elapsed) + " s");
  if (v.pass) {
    v.detail = "100% training accuracy after " + std::to_string(report.epochs.size()) + " epochs, " + fmt(elapsed) + " s";
  }
  return v;
}

// ---------------------------------------------------------------------------
// 6. Input assembly against the golden file.

Verdict protocol_fidelity() {
  Verdict v;
  std::map<std::string, std::string> label_sets = {{"fixture16.jsonl", "iemocap4"}, {"friends_mini.jsonl", "friends8"}};
  std::map<std::string, std::vector<Conversation>> corpora;
  std::vector<Conversation> all;
  for (const auto& [file, labels] : label_sets) {
    corpora[file] = load_corpus(kData + "/" + file, CorpusSchema::named(labels));
    all.insert(all.end(), corpora[file].begin(), corpora[file].end());
  }
  Vocab vocab = Vocab::build(all, LabelSet::named("friends8"), kDefaultAuxiliary);
  const auto iemocap = LabelSet::named("iemocap4");
  for (const auto& label : iemocap.labels())
    for (const auto& t : auxiliary_tokens(label)) vocab.add(t);

  std::ifstream in(kData + "/golden_inputs.jsonl");
  std::string line;
  int cases = 0, truncated = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto row = nlohmann::json::parse(line);
    const std::string file = row.at("corpus");
    const std::string where = row.at("conv_id").get<std::string>() + "/" + row.at("utt_id").get<std::string>();
    const auto schema = CorpusSchema::named(label_sets.at(file));
    std::optional<ContextWindow> window;
    for (const auto& conv : corpora.at(file)) {
      if (conv.id != row.at("conv_id")) continue;
      for (auto& w : make_windows(prepare_targets(conv, schema), row.at("context_n").get<std::size_t>())) {
        if (w.target.id == row.at("utt_id")) window = w;
      }
    }
    if (!window) {
      v.fail("no window for " + where);
      continue;
    }
    const auto seq = build_input(*window, row.at("emotion"), vocab, row.at("t_max").get<std::size_t>());
    std::vector<std::string> decoded;
    for (std::size_t id : seq.token_ids) decoded.push_back(vocab.token(id));
    const auto tokens = row.at("tokens").get<std::vector<std::string>>();
    if (seq.tokens != tokens || decoded != tokens) v.fail(where + ": tokens differ: " + seq.render());
    if (seq.segment_ids != row.at("segments").get<std::vector<std::size_t>>()) v.fail(where + ": segments differ");
    if (seq.target_span.start != row.at("target_span")[0] || seq.target_span.end != row.at("target_span")[1]) {
      v.fail(where + ": target span " + seq.target_span.str());
    }
    if (seq.target_tokens_dropped != row.at("target_tokens_dropped") || seq.context_used != row.at("context_used")) {
      v.fail(where + ": truncation bookkeeping differs");
    }
    if (seq.target_tokens_dropped > 0 || seq.context_used < window->context.size()) ++truncated;
    ++cases;
  }
  if (cases != 20) v.fail("golden file holds " + std::to_string(cases) + " cases, expected 20");
  if (truncated == 0) v.fail("no truncation case exercised");
  if (v.pass) v.detail = std::to_string(cases) + " windows identical, " + std::to_string(truncated) + " truncated";
  return v;
}

// ---------------------------------------------------------------------------
// 7. Metrics against the rescoring script's output.

Verdict metric_correctness() {
  Verdict v;
  const LabelSet labels(std::vector<std::string>{"anger", "happiness", "neutral", "sadness", "fear"});
  const auto pairs = pipeline::load_prediction_pairs(kData + "/synthetic_pairs.jsonl");
  std::ifstream in(kData + "/synthetic_metrics.json");
  const auto want = nlohmann::json::parse(in);
  const auto got = compute_metrics(pairs, labels);
  if (pairs.size() != 1000) v.fail(std::to_string(pairs.size()) + " pairs, expected 1000");
  if (got.weighted_accuracy != want.at("weighted_accuracy").get<double>()) v.fail("WA differs");
  if (got.unweighted_accuracy != want.at("unweighted_accuracy").get<double>()) v.fail("UA differs");
  if (got.per_label_accuracy != want.at("per_label_accuracy").get<std::map<std::string, double>>()) {
    v.fail("per-label accuracy differs");
  }
  if (got.confusion != want.at("confusion").get<std::vector<std::vector<std::size_t>>>()) v.fail("confusion differs");
  if (got.total != want.at("total") || got.correct != want.at("correct")) v.fail("counts differ");
  if (v.pass) {
    v.detail = "1000 pairs; WA " + fmt(got.weighted_accuracy) + ", UA " + fmt(got.unweighted_accuracy) +
               ", per-label and confusion identical";
  }
  return v;
}

// ---------------------------------------------------------------------------
// 8. Context sweep.

Verdict context_sweep() {
  Verdict v;
  const std::vector<std::size_t> values = {0, 1, 2, 4, 8};
  std::ostringstream log;
  auto cfg = fixture_config();
  const auto t0 = Clock::now();
  cfg.out = scratch("sweep_a").string();
  const auto first = pipeline::sweep_table(pipeline::context_sweep<float>(cfg, values, log));
  cfg.out = scratch("sweep_b").string();
  const auto second = pipeline::sweep_table(pipeline::context_sweep<float>(cfg, values, log));
  const double elapsed = seconds_since(t0);
  if (first != second) v.fail("two sweeps with the same seed differ");

  std::istringstream lines(first);
  std::string header, row;
  std::getline(lines, header);
  if (header != "model\tcontext\tseed\tWA\tUA") v.fail("header '" + header + "'");
  std::size_t i = 0;
  while (std::getline(lines, row)) {
    std::istringstream cells(row);
    std::string model, context, seed, wa, ua;
    std::getline(cells, model, '\t');
    std::getline(cells, context, '\t');
    std::getline(cells, seed, '\t');
    std::getline(cells, wa, '\t');
    std::getline(cells, ua, '\t');
    if (i >= values.size() || model != "SRL-GNN-" + std::to_string(values[i]) || context != std::to_string(values[i]) ||
        wa.empty() || ua.empty()) {
      v.fail("unexpected row '" + row + "'");
    }
    ++i;
  }
  if (i != values.size()) v.fail(std::to_string(i) + " rows for " + std::to_string(values.size()) + " values");
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::ifstream report(cfg.out + "/ctx-" + std::to_string(values[k]) + "/report.json");
    if (!report || nlohmann::json::parse(report).at("config").at("context_n") != values[k]) {
      v.fail("report for context " + std::to_string(values[k]) + " missing or mislabeled");
    }
  }
  if (v.pass) v.detail = "5 rows, identical across two runs, " + fmt(elapsed) + " s";
  return v;
}

// ---------------------------------------------------------------------------
// 9. Determinism.

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
  Verdict v;
  auto cfg = fixture_config();
  cfg.epochs = 3;
  std::ostringstream log;
  const auto dir_a = scratch("det_a"), dir_b = scratch("det_b");
  cfg.out = dir_a.string();
  pipeline::train<double>(cfg, log);
  cfg.out = dir_b.string();
  pipeline::train<double>(cfg, log);
  const auto a = slurp(dir_a / "model.ckpt"), b = slurp(dir_b / "model.ckpt");
  if (a.empty()) v.fail("no checkpoint written");
  if (a != b) v.fail("checkpoints differ");
  if (slurp(dir_a / "predictions.jsonl") != slurp(dir_b / "predictions.jsonl")) v.fail("predictions differ");
  if (v.pass) v.detail = "two 3-epoch runs, " + std::to_string(a.size()) + "-byte checkpoints identical";
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "graph builder matches all-pairs oracle", graph_oracle},
      {2, "graph layers match scalar-loop oracles", layer_fidelity},
      {3, "finite-difference gradient integrity", gradient_integrity},
      {4, "attention contract", attention_contract},
      {5, "overfits the 16-utterance fixture", overfit},
      {6, "input assembly matches golden file", protocol_fidelity},
      {7, "metrics match independent rescoring", metric_correctness},
      {8, "context sweep is deterministic with one row per value", context_sweep},
      {9, "bitwise-identical 64-bit checkpoints", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " (" << v.detail << ")"
              << std::endl;
    failures += !v.pass;
  }
  fs::remove_all(fs::temp_directory_path() / ("srlgnn_acceptance_" + std::to_string(::getpid())));
  return failures == 0 ? 0 : 1;
}
