#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "srlgnn/corpus.hpp"
#include "srlgnn/encoder/tokenize.hpp"
#include "srlgnn/error.hpp"

namespace srlgnn {

/// Half-open token range [start, end) over an utterance's tokens.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }

  /// True when every token of `this` lies in `other` and the spans differ.
  bool strictly_inside(const Span& other) const noexcept {
    return other.start <= start && end <= other.end && (start != other.start || end != other.end);
  }

  std::string str() const {
    return "[" + std::to_string(start) + ", " + std::to_string(end) + ")";
  }

  friend auto operator<=>(const Span&, const Span&) = default;
};

struct SrlFrame {
  Span predicate;
  std::vector<Span> arguments;

  friend bool operator==(const SrlFrame&, const SrlFrame&) = default;
};

enum class NodeKind { kPredicate, kArgument };

inline const char* to_string(NodeKind kind) {
  return kind == NodeKind::kPredicate ? "predicate" : "argument";
}

struct PaNode {
  std::size_t id = 0;
  Span span;
  NodeKind kind = NodeKind::kArgument;

  friend bool operator==(const PaNode&, const PaNode&) = default;
};

using Edge = std::pair<std::size_t, std::size_t>;  // first < second

/// Undirected predicate-argument graph over one utterance.
struct PaGraph {
  std::vector<PaNode> nodes;
  std::set<Edge> edges;
  std::size_t token_count = 0;

  bool has_edge(std::size_t a, std::size_t b) const {
    return edges.count(a < b ? Edge{a, b} : Edge{b, a}) != 0;
  }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(nodes.size());
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    return adj;
  }

  friend bool operator==(const PaGraph&, const PaGraph&) = default;
};

/// "<conv_id>/<utt_id>", the key used by SRL annotation files.
inline std::string srl_key(const std::string& conv_id, const std::string& utt_id) {
  return conv_id + "/" + utt_id;
}

using SrlAnnotations = std::map<std::string, std::vector<SrlFrame>>;

namespace detail {

inline Span parse_span(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ParseError(where + ": span must be [start, end] integers");
  }
  const auto start = j[0].get<long long>();
  const auto end = j[1].get<long long>();
  if (start < 0 || end <= start) {
    throw ValidationError(where + ": invalid span [" + std::to_string(start) + ", " +
                          std::to_string(end) + ")");
  }
  return Span{static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
}

}  // namespace detail

inline std::vector<SrlFrame> parse_frames(const nlohmann::json& list, const std::string& where) {
  if (!list.is_array()) throw ParseError(where + ": expected a list of frames");
  std::vector<SrlFrame> frames;
  for (const auto& f : list) {
    if (!f.is_object() || !f.contains("predicate")) {
      throw ParseError(where + ": frame needs a 'predicate' span");
    }
    SrlFrame frame;
    frame.predicate = detail::parse_span(f.at("predicate"), where);
    if (auto it = f.find("arguments"); it != f.end()) {
      if (!it->is_array()) throw ParseError(where + ": 'arguments' must be a list of spans");
      for (const auto& a : *it) frame.arguments.push_back(detail::parse_span(a, where));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

inline SrlAnnotations parse_srl(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("SRL annotations must be a JSON object");
  SrlAnnotations out;
  for (const auto& [key, list] : doc.items()) {
    if (key.find('/') == std::string::npos) {
      throw ParseError("SRL key '" + key + "' is not of the form <conv_id>/<utt_id>");
    }
    out.emplace(key, parse_frames(list, key));
  }
  return out;
}

/// Structural parse; cross-checks against a corpus are `validate_srl`.
inline SrlAnnotations parse_srl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open SRL file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": malformed JSON: " + e.what());
  }
  return parse_srl(doc);
}

inline nlohmann::json frames_to_json(std::span<const SrlFrame> frames) {
  auto out = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json args = nlohmann::json::array();
    for (const auto& a : f.arguments) args.push_back({a.start, a.end});
    out.push_back({{"predicate", {f.predicate.start, f.predicate.end}}, {"arguments", args}});
  }
  return out;
}

struct SrlProblem {
  enum class Kind { kUnknownKey, kOutOfRange };
  Kind kind;
  std::string key;
  std::string message;
};

/// Every span that falls outside its utterance's tokenization and every
/// key that names no utterance of `corpus`.
inline std::vector<SrlProblem> find_srl_problems(const SrlAnnotations& srl,
                                                 const std::vector<Conversation>& corpus) {
  std::map<std::string, std::size_t> token_counts;
  for (const auto& conv : corpus) {
    for (const auto& u : conv.utterances) token_counts[srl_key(conv.id, u.id)] = tokenize(u.text).size();
  }
  std::vector<SrlProblem> problems;
  for (const auto& [key, frames] : srl) {
    auto it = token_counts.find(key);
    if (it == token_counts.end()) {
      problems.push_back(
          {SrlProblem::Kind::kUnknownKey, key, "unknown utterance id '" + key + "'"});
      continue;
    }
    const std::size_t n = it->second;
    auto check = [&](const Span& s, const char* role) {
      if (s.end > n) {
        problems.push_back({SrlProblem::Kind::kOutOfRange, key,
                            std::string(role) + " span " + s.str() + " out of range for " +
                                std::to_string(n) + "-token utterance '" + key + "'"});
      }
    };
    for (const auto& f : frames) {
      check(f.predicate, "predicate");
      for (const auto& a : f.arguments) check(a, "argument");
    }
  }
  return problems;
}

inline void validate_srl(const SrlAnnotations& srl, const std::vector<Conversation>& corpus) {
  auto problems = find_srl_problems(srl, corpus);
  if (!problems.empty()) throw ValidationError(problems.front().message);
}

/// Nodes are the distinct spans ordered by (start, end); a span seen as a
/// predicate in any frame is a predicate node. Edges join each predicate
/// to its arguments and every span to the spans strictly containing it.
inline PaGraph build_graph(std::span<const SrlFrame> frames, std::size_t token_count) {
  std::map<Span, NodeKind> kinds;
  auto note = [&](const Span& s, NodeKind kind) {
    if (s.end > token_count || s.start >= s.end) {
      throw ValidationError("span " + s.str() + " outside utterance of " +
                            std::to_string(token_count) + " tokens");
    }
    auto [it, inserted] = kinds.emplace(s, kind);
    if (!inserted && kind == NodeKind::kPredicate) it->second = kind;
  };
  for (const auto& f : frames) {
    note(f.predicate, NodeKind::kPredicate);
    for (const auto& a : f.arguments) note(a, NodeKind::kArgument);
  }

  PaGraph g;
  g.token_count = token_count;
  std::map<Span, std::size_t> ids;
  for (const auto& [span, kind] : kinds) {
    ids.emplace(span, g.nodes.size());
    g.nodes.push_back(PaNode{g.nodes.size(), span, kind});
  }
  auto connect = [&](std::size_t a, std::size_t b) {
    if (a != b) g.edges.insert(a < b ? Edge{a, b} : Edge{b, a});
  };
  for (const auto& f : frames) {
    for (const auto& a : f.arguments) connect(ids.at(f.predicate), ids.at(a));
  }
  for (std::size_t a = 0; a < g.nodes.size(); ++a) {
    for (std::size_t b = 0; b < g.nodes.size(); ++b) {
      if (g.nodes[a].span.strictly_inside(g.nodes[b].span)) connect(a, b);
    }
  }
  return g;
}

/// Re-expresses a graph after the first `dropped` tokens of its utterance
/// were cut away: nodes touching the cut are removed along with their
/// edges, surviving spans shift left and ids are renumbered in order.
inline PaGraph drop_leading_tokens(const PaGraph& g, std::size_t dropped) {
  if (dropped == 0) return g;
  PaGraph out;
  out.token_count = g.token_count > dropped ? g.token_count - dropped : 0;
  std::vector<std::size_t> remap(g.nodes.size(), SIZE_MAX);
  for (const auto& n : g.nodes) {
    if (n.span.start < dropped) continue;
    remap[n.id] = out.nodes.size();
    out.nodes.push_back(
        PaNode{out.nodes.size(), Span{n.span.start - dropped, n.span.end - dropped}, n.kind});
  }
  for (const auto& [a, b] : g.edges) {
    if (remap[a] != SIZE_MAX && remap[b] != SIZE_MAX) out.edges.insert({remap[a], remap[b]});
  }
  return out;
}

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t isolated_nodes = 0;
  std::size_t max_degree = 0;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

inline GraphStats graph_stats(const PaGraph& g) {
  GraphStats s;
  s.node_count = g.nodes.size();
  s.edge_count = g.edges.size();
  std::vector<std::size_t> degree(g.nodes.size(), 0);
  for (const auto& [a, b] : g.edges) {
    ++degree[a];
    ++degree[b];
  }
  for (std::size_t d : degree) {
    if (d == 0) ++s.isolated_nodes;
    s.max_degree = std::max(s.max_degree, d);
  }
  return s;
}

inline nlohmann::json graph_to_json(const PaGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"id", n.id}, {"span", {n.span.start, n.span.end}}, {"kind", to_string(n.kind)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  const auto s = graph_stats(g);
  return {{"token_count", g.token_count},
          {"nodes", nodes},
          {"edges", edges},
          {"stats",
           {{"node_count", s.node_count},
            {"edge_count", s.edge_count},
            {"isolated_nodes", s.isolated_nodes},
            {"max_degree", s.max_degree}}}};
}

}  // namespace srlgnn
