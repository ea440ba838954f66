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

// Caption augmentation: back translation through a pivot language (served
// from an offline cache or a pluggable provider) followed by EDA word edits.

#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include "lbar/data/text.hpp"
#include "lbar/error.hpp"
#include "lbar/rng.hpp"

namespace lbar {

struct TextAugConfig {
  double p_eda = 0.0;
  double p_syn = 0.0;
  double p_swp = 0.0;
  double p_ins = 0.0;
  double p_del = 0.0;
  double p_bt = 0.0;

  void validate() const {
    auto check = [](double p, const char* key, double hi, const char* range) {
      if (!(p >= 0.0 && p <= hi)) throw ConfigError(key, std::string("must be in ") + range);
    };
    check(p_eda, "p_EDA", 1.0, "[0, 1]");
    check(p_bt, "p_bt", 1.0, "[0, 1]");
    check(p_syn, "p_syn", 0.3, "[0, 0.3]");
    check(p_swp, "p_swp", 0.3, "[0, 0.3]");
    check(p_ins, "p_ins", 0.3, "[0, 0.3]");
    check(p_del, "p_del", 0.3, "[0, 0.3]");
  }

  bool is_identity() const { return p_eda == 0.0 && p_bt == 0.0; }
};

enum class Pivot { kGerman, kFrench, kSpanish };

inline constexpr std::array<Pivot, 3> kAllPivots{Pivot::kGerman, Pivot::kFrench, Pivot::kSpanish};

inline const char* pivot_code(Pivot p) {
  switch (p) {
    case Pivot::kGerman: return "de";
    case Pivot::kFrench: return "fr";
    case Pivot::kSpanish: return "es";
  }
  return "?";
}

inline Pivot pivot_from_code(const std::string& code) {
  for (Pivot p : kAllPivots)
    if (code == pivot_code(p)) return p;
  throw std::invalid_argument("unknown pivot language '" + code + "' (expected de|fr|es)");
}

// ---------------------------------------------------------------------------
// Synonyms

class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  // Self-references are dropped.
  void add(const std::string& word, std::vector<std::string> synonyms) {
    std::erase(synonyms, word);
    if (synonyms.empty()) return;
    map_[word] = std::move(synonyms);
  }

  const std::vector<std::string>* find(const std::string& word) const {
    auto it = map_.find(word);
    return it == map_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }

  // JSON object: word -> array of words.
  static SynonymLexicon from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("synonym lexicon must be a JSON object");
    SynonymLexicon lex;
    for (const auto& [word, syns] : j.items()) {
      if (!syns.is_array()) throw FormatError("synonym lexicon entry '" + word + "' is not an array");
      lex.add(word, syns.get<std::vector<std::string>>());
    }
    return lex;
  }

  static SynonymLexicon load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open synonym lexicon '" + path.string() + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }

 private:
  std::map<std::string, std::vector<std::string>> map_;
};

// ---------------------------------------------------------------------------
// Back translation

// Round trip English -> pivot -> English.
using TranslationProvider = std::function<std::string(const std::string& text, Pivot pivot)>;

inline constexpr const char* kCacheFormat = "lbar-translation-cache";
inline constexpr int kCacheVersion = 1;

// (source, pivot) -> back-translated text, persisted as JSONL: one header line
// {"format": ..., "version": 1} followed by {"source", "pivot", "result"} records.
class TranslationCache {
 public:
  using Key = std::pair<std::string, Pivot>;

  const std::string* find(const std::string& source, Pivot pivot) const {
    auto it = entries_.find(Key{source, pivot});
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool insert(const std::string& source, Pivot pivot, std::string result) {
    return entries_.insert_or_assign(Key{source, pivot}, std::move(result)).second;
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<Key, std::string>& entries() const { return entries_; }

  static nlohmann::json header() { return {{"format", kCacheFormat}, {"version", kCacheVersion}}; }

  static nlohmann::json record(const std::string& source, Pivot pivot, const std::string& result) {
    return {{"source", source}, {"pivot", pivot_code(pivot)}, {"result", result}};
  }

  static TranslationCache load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PersistenceError("cannot open translation cache '" + path.string() + "'");
    TranslationCache cache;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = path.string() + ":" + std::to_string(line_no);
      try {
        auto j = nlohmann::json::parse(line);
        if (j.contains("format")) {
          if (j["format"] != kCacheFormat || j.value("version", 0) != kCacheVersion)
            throw PersistenceError(where + ": unsupported cache header");
          continue;
        }
        cache.insert(j.at("source").get<std::string>(), pivot_from_code(j.at("pivot").get<std::string>()),
                     j.at("result").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw PersistenceError(where + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw PersistenceError(where + ": " + e.what());
      }
    }
    return cache;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw PersistenceError("cannot write translation cache '" + path.string() + "'");
    out << header().dump() << "\n";
    for (const auto& [key, result] : entries_) out << record(key.first, key.second, result).dump() << "\n";
  }

 private:
  std::map<Key, std::string> entries_;
};

// Cache first, then the live provider when one is configured.
struct BackTranslator {
  const TranslationCache* cache = nullptr;
  TranslationProvider provider;

  std::string operator()(const std::string& text, Pivot pivot) const {
    if (cache != nullptr)
      if (const auto* hit = cache->find(text, pivot)) return *hit;
    if (provider) return provider(text, pivot);
    throw ServiceError(std::string("no back translation for (\"") + text + "\", " + pivot_code(pivot) +
                       ") in the cache and no provider configured");
  }
};

// Test double: a reversible word mapping. Forward encodes every word for the
// pivot, backward decodes it again, so the round trip returns the
// whitespace-normalized input.
struct MockTranslator {
  static std::string forward(const std::string& text, Pivot pivot) {
    std::string out;
    for (const auto& w : split_words(text)) {
      if (!out.empty()) out.push_back(' ');
      out += std::string(pivot_code(pivot)) + ":" + std::string(w.rbegin(), w.rend());
    }
    return out;
  }

  static std::string backward(const std::string& text, Pivot pivot) {
    const std::string prefix = std::string(pivot_code(pivot)) + ":";
    std::string out;
    for (const auto& w : split_words(text)) {
      if (w.rfind(prefix, 0) != 0) throw ServiceError("mock translator got foreign token '" + w + "'");
      if (!out.empty()) out.push_back(' ');
      out.append(w.rbegin(), w.rend() - std::ptrdiff_t(prefix.size()));
    }
    return out;
  }

  std::string operator()(const std::string& text, Pivot pivot) const { return backward(forward(text, pivot), pivot); }
};

// With probability p_bt, paraphrases `text` through a uniformly chosen pivot.
inline std::string back_translate(const std::string& text, const TextAugConfig& cfg, const BackTranslator& bt,
                                  Rng& rng) {
  if (!rng.bernoulli(cfg.p_bt)) return text;
  const Pivot pivot = kAllPivots[rng.index(kAllPivots.size())];
  return bt(text, pivot);
}

struct CacheBuildReport {
  std::size_t added = 0;
  std::size_t skipped = 0;
  std::vector<std::pair<std::string, Pivot>> failed;
};

// Resolves every (caption, pivot) pair missing from the cache at `path` and
// appends results as they arrive, so a failing provider leaves a usable
// partial cache.
inline CacheBuildReport cache_build(std::span<const std::string> captions, std::span<const Pivot> pivots,
                                    const TranslationProvider& provider, const std::filesystem::path& path) {
  TranslationCache cache;
  const bool exists = std::filesystem::exists(path);
  if (exists) cache = TranslationCache::load(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw PersistenceError("cannot write translation cache '" + path.string() + "'");
  if (!exists) out << TranslationCache::header().dump() << "\n" << std::flush;

  CacheBuildReport report;
  for (const auto& caption : captions) {
    for (Pivot pivot : pivots) {
      if (cache.find(caption, pivot) != nullptr) {
        ++report.skipped;
        continue;
      }
      std::string result;
      try {
        result = provider(caption, pivot);
      } catch (const std::exception&) {
        report.failed.emplace_back(caption, pivot);
        continue;
      }
      out << TranslationCache::record(caption, pivot, result).dump() << "\n" << std::flush;
      cache.insert(caption, pivot, std::move(result));
      ++report.added;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// EDA

enum class EdaOp { kInsert, kDelete, kSwap, kSynonym };

inline const char* to_string(EdaOp op) {
  switch (op) {
    case EdaOp::kInsert: return "insert";
    case EdaOp::kDelete: return "delete";
    case EdaOp::kSwap: return "swap";
    case EdaOp::kSynonym: return "synonym";
  }
  return "?";
}

// Applies one EDA operation to every word with that operation's probability.
inline std::vector<std::string> eda_apply(EdaOp op, std::vector<std::string> tokens, const TextAugConfig& cfg,
                                          const SynonymLexicon& lex, std::span<const std::string> corpus_vocab,
                                          Rng& rng) {
  switch (op) {
    case EdaOp::kInsert: {
      std::vector<std::string> out;
      out.reserve(tokens.size() * 2);
      for (auto& w : tokens) {
        out.push_back(std::move(w));
        if (rng.bernoulli(cfg.p_ins) && !corpus_vocab.empty()) out.push_back(corpus_vocab[rng.index(corpus_vocab.size())]);
      }
      return out;
    }
    case EdaOp::kDelete: {
      std::vector<std::string> out;
      out.reserve(tokens.size());
      for (auto& w : tokens)
        if (!rng.bernoulli(cfg.p_del)) out.push_back(std::move(w));
      return out;
    }
    case EdaOp::kSwap: {
      const std::size_t n = tokens.size();
      if (n < 2) return tokens;
      for (std::size_t i = 0; i < n; ++i) {
        if (!rng.bernoulli(cfg.p_swp)) continue;
        std::size_t j = rng.index(n - 1);
        if (j >= i) ++j;
        std::swap(tokens[i], tokens[j]);
      }
      return tokens;
    }
    case EdaOp::kSynonym: {
      for (auto& w : tokens) {
        if (!rng.bernoulli(cfg.p_syn)) continue;
        if (const auto* syns = lex.find(w)) w = (*syns)[rng.index(syns->size())];
      }
      return tokens;
    }
  }
  return tokens;
}

// With probability p_EDA, picks one operation uniformly and applies it.
inline std::vector<std::string> eda(std::vector<std::string> tokens, const TextAugConfig& cfg,
                                    const SynonymLexicon& lex, std::span<const std::string> corpus_vocab, Rng& rng) {
  if (!rng.bernoulli(cfg.p_eda)) return tokens;
  constexpr std::array<EdaOp, 4> ops{EdaOp::kInsert, EdaOp::kDelete, EdaOp::kSwap, EdaOp::kSynonym};
  return eda_apply(ops[rng.index(ops.size())], std::move(tokens), cfg, lex, corpus_vocab, rng);
}

// Back translation on the raw text, then preprocessing, then EDA.
inline std::string augment_caption(const std::string& text, const TextAugConfig& cfg, const BackTranslator& bt,
                                   const SynonymLexicon& lex, std::span<const std::string> corpus_vocab, Rng& rng) {
  const std::string translated = back_translate(text, cfg, bt, rng);
  auto words = eda(split_words(preprocess_caption(translated)), cfg, lex, corpus_vocab, rng);
  // Lexicon entries are not guaranteed to be preprocessed.
  return preprocess_caption(join_words(words));
}

}  // namespace lbar
