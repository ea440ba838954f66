/* Copyright 2026 The lbar Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Caption preprocessing (lowercase, punctuation removal, whitespace
// collapsing) and a whitespace tokenizer over a corpus vocabulary.

#pragma once

#include <algorithm>
#include <array>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lbar/detail/unicode_tables.hpp"

namespace lbar {

namespace detail {

// Decodes one UTF-8 sequence starting at s[i]; malformed bytes decode to U+FFFD.
inline char32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  char32_t cp = 0xFFFD;
  std::size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2) {
    if (int c1 = cont(1); c1 >= 0) cp = char32_t(((b0 & 0x1F) << 6) | c1), len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = c1 >= 0 ? cont(2) : -1;
    if (c2 >= 0) {
      char32_t v = char32_t(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
      if (v >= 0x800 && (v < 0xD800 || v > 0xDFFF)) cp = v, len = 3;
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = c1 >= 0 ? cont(2) : -1, c3 = c2 >= 0 ? cont(3) : -1;
    if (c3 >= 0) {
      char32_t v = char32_t(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
      if (v >= 0x10000 && v <= 0x10FFFF) cp = v, len = 4;
    }
  }
  i += len;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(char(cp));
  } else if (cp < 0x800) {
    out.push_back(char(0xC0 | (cp >> 6)));
    out.push_back(char(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(char(0xE0 | (cp >> 12)));
    out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(char(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(char(0xF0 | (cp >> 18)));
    out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(char(0x80 | (cp & 0x3F)));
  }
}

template <std::size_t N>
bool in_ranges(const std::array<CodepointRange, N>& table, char32_t cp) {
  auto it = std::upper_bound(table.begin(), table.end(), cp,
                             [](char32_t v, const CodepointRange& r) { return v < r.lo; });
  return it != table.begin() && cp <= std::prev(it)->hi;
}

}  // namespace detail

inline bool is_punctuation(char32_t cp) { return detail::in_ranges(detail::kPunctuationRanges, cp); }
inline bool is_whitespace(char32_t cp) { return detail::in_ranges(detail::kWhitespaceRanges, cp); }

inline char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  for (const auto& run : detail::kLowercaseRuns) {
    if (cp < run.lo) break;
    if (cp <= run.hi && (cp - run.lo) % run.stride == 0) return char32_t(std::int32_t(cp) + run.delta);
  }
  return cp;
}

// Lowercases, removes every Unicode punctuation character (general category
// P*), collapses whitespace runs to one space and trims.
inline std::string preprocess_caption(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size();) {
    const char32_t cp = detail::next_codepoint(text, i);
    if (is_punctuation(cp)) continue;
    if (is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    detail::append_utf8(out, to_lower(cp));
  }
  return out;
}

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

inline std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr std::size_t kMaxTokens = 32;

// Word -> id map. Ids 0 and 1 are reserved for PAD and UNK and are never
// produced by a lookup of a real word.
class TokenVocab {
 public:
  TokenVocab() : words_{"<pad>", "<unk>"} {}

  int add(const std::string& word) {
    auto [it, inserted] = ids_.try_emplace(word, int(words_.size()));
    if (inserted) words_.push_back(word);
    return it->second;
  }

  int id(const std::string& word) const {
    auto it = ids_.find(word);
    return it == ids_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& word) const { return ids_.count(word) != 0; }
  const std::string& word(int id) const { return words_.at(std::size_t(id)); }
  int size() const { return int(words_.size()); }

  // Real words in id order (excludes PAD and UNK).
  std::span<const std::string> words() const { return std::span(words_).subspan(2); }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> words_;
};

inline TokenVocab build_vocab(std::span<const std::string> captions) {
  TokenVocab vocab;
  for (const auto& c : captions)
    for (const auto& w : split_words(c)) vocab.add(w);
  return vocab;
}

struct TokenSequence {
  std::vector<int> ids;  // at most kMaxTokens
  std::string raw_text;
};

inline TokenSequence tokenize(std::string_view text, const TokenVocab& vocab) {
  TokenSequence seq;
  seq.raw_text = std::string(text);
  for (const auto& w : split_words(text)) {
    if (seq.ids.size() == kMaxTokens) break;
    seq.ids.push_back(vocab.id(w));
  }
  return seq;
}

// Pads every sequence with PAD to the longest length in the batch.
inline void pad_to_longest(std::span<TokenSequence> batch) {
  std::size_t longest = 0;
  for (const auto& s : batch) longest = std::max(longest, s.ids.size());
  for (auto& s : batch) s.ids.resize(longest, kPadId);
}

}  // namespace lbar
