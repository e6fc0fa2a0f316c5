#pragma once

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "srlgnn/corpus.hpp"
#include "srlgnn/encoder/tokenize.hpp"
#include "srlgnn/error.hpp"

namespace srlgnn {

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";

/// Token <-> id map with the four specials pinned to ids 0..3.
class Vocab {
 public:
  static constexpr std::size_t kCls = 0;
  static constexpr std::size_t kSep = 1;
  static constexpr std::size_t kPad = 2;
  static constexpr std::size_t kUnk = 3;

  Vocab() : Vocab(std::vector<std::string>{}) {}

  /// `tokens` excludes the specials; duplicates are ignored.
  explicit Vocab(const std::vector<std::string>& tokens) {
    for (const char* s : {kClsToken, kSepToken, kPadToken, kUnkToken}) push(s);
    for (const auto& t : tokens) add(t);
  }

  std::size_t add(const std::string& token) {
    auto it = ids_.find(token);
    return it != ids_.end() ? it->second : push(token);
  }

  std::size_t id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Non-special tokens, in id order.
  std::vector<std::string> words() const { return {tokens_.begin() + 4, tokens_.end()}; }

  /// Every token of every utterance plus the auxiliary-sentence words for
  /// each label, in first-seen order.
  static Vocab build(const std::vector<Conversation>& corpus, const LabelSet& labels,
                     const std::string& auxiliary_template);

  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocab " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    const std::vector<std::string> specials = {kClsToken, kSepToken, kPadToken, kUnkToken};
    if (lines.size() < 4 || !std::equal(specials.begin(), specials.end(), lines.begin())) {
      throw ParseError(path + ": vocab must start with [CLS], [SEP], [PAD], [UNK]");
    }
    Vocab v;
    for (std::size_t i = 4; i < lines.size(); ++i) {
      if (v.contains(lines[i])) throw ParseError(path + ": duplicate token '" + lines[i] + "'", i + 1);
      v.push(lines[i]);
    }
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocab " + path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::size_t push(const std::string& token) {
    ids_.emplace(token, tokens_.size());
    tokens_.push_back(token);
    return tokens_.size() - 1;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace srlgnn
