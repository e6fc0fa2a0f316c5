#pragma once

#include <string>
#include <vector>

#include "srlgnn/corpus.hpp"
#include "srlgnn/encoder/tokenize.hpp"
#include "srlgnn/encoder/vocab.hpp"
#include "srlgnn/srl_graph.hpp"

namespace srlgnn {

inline constexpr const char* kEmotionSlot = "[EMOTION]";
inline constexpr const char* kDefaultAuxiliary = "That statement expressed [EMOTION]";

/// Token words of the auxiliary sentence for one emotion.
inline std::vector<std::string> auxiliary_tokens(const std::string& emotion,
                                                 const std::string& templ = kDefaultAuxiliary) {
  std::string sentence = templ;
  const auto at = sentence.find(kEmotionSlot);
  if (at == std::string::npos) throw ConfigError("auxiliary template lacks [EMOTION]");
  sentence.replace(at, std::string(kEmotionSlot).size(), emotion);
  return tokenize(sentence);
}

inline Vocab Vocab::build(const std::vector<Conversation>& corpus, const LabelSet& labels,
                          const std::string& auxiliary_template) {
  Vocab v;
  for (const auto& conv : corpus)
    for (const auto& u : conv.utterances)
      for (const auto& t : tokenize(u.text)) v.add(t);
  for (const auto& label : labels.labels())
    for (const auto& t : auxiliary_tokens(label, auxiliary_template)) v.add(t);
  return v;
}

/// `[CLS] ctx_1 [SEP] ... ctx_k [SEP] target [SEP] aux [SEP]` as ids.
struct InputSequence {
  std::vector<std::string> tokens;  // surface form, specials included
  std::vector<std::size_t> token_ids;
  std::vector<std::size_t> segment_ids;
  Span target_span;                   // positions of the target utterance's tokens
  std::size_t target_tokens_dropped = 0;  // left-truncated target tokens
  std::size_t context_used = 0;

  std::size_t size() const noexcept { return token_ids.size(); }

  std::string render() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += ' ';
      out += tokens[i];
    }
    return out;
  }
};

/// Assembles the text-A/text-B input for one (window, emotion) pair. When
/// the sequence would exceed `t_max`, the oldest context utterances go
/// first, then tokens from the front of the target; the auxiliary sentence
/// is never cut.
inline InputSequence build_input(const ContextWindow& window, const std::string& emotion,
                                 const Vocab& vocab, std::size_t t_max,
                                 const std::string& auxiliary_template = kDefaultAuxiliary) {
  const auto aux = auxiliary_tokens(emotion, auxiliary_template);
  std::vector<std::string> target = tokenize(window.target.text);
  std::vector<std::vector<std::string>> context;
  for (const auto& u : window.context) context.push_back(tokenize(u.text));

  const std::size_t fixed = 1 + (aux.size() + 1) + 1;  // [CLS], aux [SEP], target [SEP]
  std::size_t total = fixed + target.size();
  for (const auto& c : context) total += c.size() + 1;
  std::size_t first_context = 0;
  while (total > t_max && first_context < context.size()) {
    total -= context[first_context].size() + 1;
    ++first_context;
  }
  std::size_t dropped = 0;
  if (total > t_max) {
    if (t_max < fixed + 1) {
      throw ValidationError("input for utterance '" + window.target.id + "' cannot fit in " +
                            std::to_string(t_max) + " tokens with the auxiliary sentence");
    }
    dropped = total - t_max;
  }

  InputSequence seq;
  auto push = [&](const std::string& tok, std::size_t segment) {
    seq.tokens.push_back(tok);
    seq.token_ids.push_back(vocab.id(tok));
    seq.segment_ids.push_back(segment);
  };
  push(kClsToken, 0);
  for (std::size_t i = first_context; i < context.size(); ++i) {
    for (const auto& t : context[i]) push(t, 0);
    push(kSepToken, 0);
  }
  seq.target_span.start = seq.size();
  for (std::size_t i = dropped; i < target.size(); ++i) push(target[i], 0);
  seq.target_span.end = seq.size();
  push(kSepToken, 0);
  for (const auto& t : aux) push(t, 1);
  push(kSepToken, 1);
  seq.target_tokens_dropped = dropped;
  seq.context_used = context.size() - first_context;
  return seq;
}

}  // namespace srlgnn
