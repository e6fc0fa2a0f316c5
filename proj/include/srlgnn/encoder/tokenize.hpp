#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace srlgnn {

namespace detail {
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
}  // namespace detail

/// Lowercases ASCII, splits on whitespace, and peels leading and trailing
/// punctuation off every chunk as one-character tokens. Word-internal
/// punctuation ("don't", "non-neutral") stays inside the word.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !detail::is_space(text[j])) ++j;
    if (j == i) break;
    std::size_t lo = i, hi = j;
    while (lo < hi && detail::is_punct(text[lo])) ++lo;
    while (hi > lo && detail::is_punct(text[hi - 1])) --hi;
    for (std::size_t k = i; k < lo; ++k) tokens.emplace_back(1, text[k]);
    if (lo < hi) {
      std::string word(text.substr(lo, hi - lo));
      for (auto& c : word) {
        if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(c));
      }
      tokens.push_back(std::move(word));
    }
    for (std::size_t k = hi; k < j; ++k) tokens.emplace_back(1, text[k]);
    i = j;
  }
  return tokens;
}

}  // namespace srlgnn
