#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "srlgnn/error.hpp"

namespace srlgnn {

struct Utterance {
  std::string id;
  std::string speaker;
  std::string text;
  std::vector<std::string> votes;
  std::optional<std::string> gold;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

/// Ordered emotion labels; a label's ordinal is its position.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].empty()) throw ConfigError("empty label name");
      if (!index_.emplace(labels_[i], i).second) {
        throw ConfigError("duplicate label '" + labels_[i] + "'");
      }
    }
  }

  /// iemocap4, friends8, friends4, or a comma-separated custom list.
  static LabelSet named(const std::string& name);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  const std::string& label(std::size_t ordinal) const { return labels_.at(ordinal); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  bool contains(const std::string& label) const { return index_.count(label) != 0; }

  std::size_t ordinal(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw ValidationError("unknown label '" + label + "'");
    return it->second;
  }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace labelsets {

inline const std::vector<std::string>& iemocap_all() {
  static const std::vector<std::string> kLabels = {
      "neutral", "happiness", "sadness", "anger", "surprise",
      "fear",    "disgust",   "frustration", "excited", "other"};
  return kLabels;
}

inline const std::vector<std::string>& iemocap4() {
  static const std::vector<std::string> kLabels = {"anger", "happiness", "neutral", "sadness"};
  return kLabels;
}

inline const std::vector<std::string>& friends8() {
  static const std::vector<std::string> kLabels = {"non-neutral", "neutral", "joy",  "sadness",
                                                    "anger",       "disgust", "fear", "surprise"};
  return kLabels;
}

inline const std::vector<std::string>& friends4() {
  static const std::vector<std::string> kLabels = {"joy", "sadness", "anger", "neutral"};
  return kLabels;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace labelsets

inline LabelSet LabelSet::named(const std::string& name) {
  if (name == "iemocap4") return LabelSet(labelsets::iemocap4());
  if (name == "friends8") return LabelSet(labelsets::friends8());
  if (name == "friends4") return LabelSet(labelsets::friends4());
  auto custom = labelsets::split_list(name);
  if (custom.size() < 2) {
    throw ConfigError("unknown label set '" + name +
                      "' (expected iemocap4, friends8, friends4 or a comma-separated list)");
  }
  return LabelSet(std::move(custom));
}

/// How gold labels are obtained from a corpus file.
enum class VotePolicy {
  kGoldFromFile,  // gold field as shipped, e.g. Friends
  kConsensus,     // derived from annotator votes, e.g. IEMOCAP
};

/// `labels` is the classification target set; `accepted` is every label
/// string allowed to appear in the file (votes and gold).
struct CorpusSchema {
  LabelSet labels;
  LabelSet accepted;
  VotePolicy policy = VotePolicy::kGoldFromFile;

  static CorpusSchema named(const std::string& name) {
    if (name == "iemocap4") {
      return {LabelSet(labelsets::iemocap4()), LabelSet(labelsets::iemocap_all()),
              VotePolicy::kConsensus};
    }
    if (name == "friends4") {
      return {LabelSet(labelsets::friends4()), LabelSet(labelsets::friends8()),
              VotePolicy::kGoldFromFile};
    }
    LabelSet set = LabelSet::named(name);
    return {set, set, VotePolicy::kGoldFromFile};
  }
};

inline bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
}

/// Parses corpus JSONL from a stream. `source` names the input in errors.
inline std::vector<Conversation> parse_corpus(std::istream& in, const CorpusSchema& schema,
                                              const std::string& source = "<corpus>") {
  std::vector<Conversation> out;
  std::unordered_set<std::string> closed;
  std::unordered_set<std::string> utt_ids;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) { throw ParseError(source + ": " + msg, lineno); };
  auto check_label = [&](const std::string& label) {
    if (!schema.accepted.contains(label)) fail("unknown label '" + label + "'");
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) fail("expected a JSON object");
    auto str_field = [&](const char* key) -> std::string {
      auto it = obj.find(key);
      if (it == obj.end() || !it->is_string()) fail(std::string("missing string field '") + key + "'");
      return it->get<std::string>();
    };

    Utterance utt;
    const std::string conv_id = str_field("conv_id");
    utt.id = str_field("utt_id");
    utt.speaker = str_field("speaker");
    utt.text = str_field("text");
    if (is_blank(utt.text)) fail("utterance '" + utt.id + "' has empty text");
    if (auto it = obj.find("votes"); it != obj.end() && !it->is_null()) {
      if (!it->is_array()) fail("'votes' must be an array of strings");
      for (const auto& v : *it) {
        if (!v.is_string()) fail("'votes' must be an array of strings");
        utt.votes.push_back(v.get<std::string>());
        check_label(utt.votes.back());
      }
    }
    if (auto it = obj.find("gold"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) fail("'gold' must be a string");
      utt.gold = it->get<std::string>();
      check_label(*utt.gold);
    }

    if (out.empty() || out.back().id != conv_id) {
      if (!out.empty()) closed.insert(out.back().id);
      if (closed.count(conv_id)) fail("lines of conversation '" + conv_id + "' are not contiguous");
      out.push_back(Conversation{conv_id, {}});
      utt_ids.clear();
    }
    if (!utt_ids.insert(utt.id).second) {
      fail("duplicate utterance id '" + utt.id + "' in conversation '" + conv_id + "'");
    }
    out.back().utterances.push_back(std::move(utt));
  }
  return out;
}

inline std::vector<Conversation> load_corpus(const std::string& path, const CorpusSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path);
  return parse_corpus(in, schema, path);
}

inline void write_corpus(std::ostream& out, const std::vector<Conversation>& corpus) {
  for (const auto& conv : corpus) {
    for (const auto& u : conv.utterances) {
      nlohmann::json obj = {
          {"conv_id", conv.id}, {"utt_id", u.id}, {"speaker", u.speaker}, {"text", u.text}};
      if (!u.votes.empty()) obj["votes"] = u.votes;
      if (u.gold) obj["gold"] = *u.gold;
      out << obj.dump() << '\n';
    }
  }
}

inline void save_corpus(const std::string& path, const std::vector<Conversation>& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus " + path);
  write_corpus(out, corpus);
}

/// Label holding a strict plurality of at least two votes, if any.
inline std::optional<std::string> majority_vote(const std::vector<std::string>& votes) {
  std::map<std::string, std::size_t> counts;
  for (const auto& v : votes) ++counts[v];
  std::optional<std::string> best;
  std::size_t best_count = 0;
  bool tied = false;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
      tied = false;
    } else if (count == best_count) {
      tied = true;
    }
  }
  if (!best || tied || best_count < 2) return std::nullopt;
  return best;
}

/// Keeps utterances whose vote majority lands in `keep`, with gold set to it.
inline Conversation consensus_filter(const Conversation& conv, const LabelSet& keep) {
  Conversation out{conv.id, {}};
  for (const auto& u : conv.utterances) {
    auto label = majority_vote(u.votes);
    if (!label || !keep.contains(*label)) continue;
    Utterance kept = u;
    kept.gold = std::move(label);
    out.utterances.push_back(std::move(kept));
  }
  return out;
}

/// The full conversation with gold set exactly on the utterances that are
/// classification targets under `schema`; everything else keeps its place
/// as potential context but carries no gold.
inline Conversation prepare_targets(const Conversation& conv, const CorpusSchema& schema) {
  Conversation out = conv;
  if (schema.policy == VotePolicy::kConsensus) {
    const Conversation kept = consensus_filter(conv, schema.labels);
    std::unordered_map<std::string, std::string> gold;
    for (const auto& u : kept.utterances) gold.emplace(u.id, *u.gold);
    for (auto& u : out.utterances) {
      auto it = gold.find(u.id);
      u.gold = it == gold.end() ? std::nullopt : std::optional<std::string>(it->second);
    }
  } else {
    for (auto& u : out.utterances) {
      if (u.gold && !schema.labels.contains(*u.gold)) u.gold.reset();
    }
  }
  return out;
}

struct ContextWindow {
  std::string conv_id;
  Utterance target;
  std::vector<Utterance> context;  // oldest first
  std::size_t n_requested = 0;
};

/// One window per gold-labelled utterance, with up to `n` immediately
/// preceding utterances of the same conversation as context.
inline std::vector<ContextWindow> make_windows(const Conversation& conv, std::size_t n) {
  std::vector<ContextWindow> out;
  const auto& utts = conv.utterances;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    if (!utts[i].gold) continue;
    const std::size_t first = i >= n ? i - n : 0;
    out.push_back(ContextWindow{conv.id, utts[i],
                                std::vector<Utterance>(utts.begin() + static_cast<std::ptrdiff_t>(first),
                                                       utts.begin() + static_cast<std::ptrdiff_t>(i)),
                                n});
  }
  return out;
}

struct Metrics {
  double weighted_accuracy = 0.0;
  double unweighted_accuracy = 0.0;
  /// Only labels with at least one gold instance appear here.
  std::map<std::string, double> per_label_accuracy;
  /// confusion[gold][pred], indexed by label ordinal.
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
  std::size_t correct = 0;
};

/// (gold, predicted) pair.
using LabeledPrediction = std::pair<std::string, std::string>;

inline Metrics compute_metrics(std::span<const LabeledPrediction> preds, const LabelSet& labels) {
  if (preds.empty()) throw ValidationError("compute_metrics: no predictions");
  const std::size_t e = labels.size();
  Metrics m;
  m.confusion.assign(e, std::vector<std::size_t>(e, 0));
  for (const auto& [gold, pred] : preds) ++m.confusion[labels.ordinal(gold)][labels.ordinal(pred)];
  m.total = preds.size();
  double ua_sum = 0.0;
  std::size_t ua_count = 0;
  for (std::size_t g = 0; g < e; ++g) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < e; ++p) row += m.confusion[g][p];
    m.correct += m.confusion[g][g];
    if (row == 0) continue;
    const double acc = static_cast<double>(m.confusion[g][g]) / static_cast<double>(row);
    m.per_label_accuracy[labels.label(g)] = acc;
    ua_sum += acc;
    ++ua_count;
  }
  m.weighted_accuracy = static_cast<double>(m.correct) / static_cast<double>(m.total);
  m.unweighted_accuracy = ua_sum / static_cast<double>(ua_count);
  return m;
}

}  // namespace srlgnn
