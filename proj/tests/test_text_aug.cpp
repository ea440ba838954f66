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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "lbar/text_aug.hpp"
#include "lbar/text_aug_http.hpp"

namespace lbar {
namespace {

std::vector<std::string> words(const std::string& s) { return split_words(s); }

TEST(TextAugConfig, RangesAreEnforced) {
  TextAugConfig c;
  EXPECT_NO_THROW(c.validate());
  c.p_del = 0.31;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "p_del");
  }
  c = {};
  c.p_eda = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Lexicon

TEST(Lexicon, DropsSelfReferences) {
  SynonymLexicon lex;
  lex.add("rain", {"rain", "drizzle"});
  lex.add("same", {"same"});
  ASSERT_NE(lex.find("rain"), nullptr);
  EXPECT_EQ(*lex.find("rain"), std::vector<std::string>{"drizzle"});
  EXPECT_EQ(lex.find("same"), nullptr);
}

TEST(Lexicon, ShippedFileLoadsWithoutSelfReferences) {
  const auto lex = SynonymLexicon::load(std::string(LBAR_DATA_DIR) + "/synonyms.json");
  EXPECT_GE(lex.size(), 900u);
  const auto raw = nlohmann::json::parse(std::ifstream(std::string(LBAR_DATA_DIR) + "/synonyms.json"));
  for (const auto& [word, syns] : raw.items())
    for (const auto& s : syns) EXPECT_NE(s.get<std::string>(), word);
}

// ---------------------------------------------------------------------------
// Back translation

TEST(BackTranslation, CacheHitReturnsStoredParaphrase) {
  TranslationCache cache;
  for (Pivot p : kAllPivots) cache.insert("The rain pours down.", p, "It rains cats and dogs.");
  TextAugConfig cfg;
  cfg.p_bt = 1.0;
  Rng rng(1);
  EXPECT_EQ(back_translate("The rain pours down.", cfg, BackTranslator{&cache, {}}, rng), "It rains cats and dogs.");
}

TEST(BackTranslation, ZeroProbabilityNeverCallsProvider) {
  int calls = 0;
  BackTranslator bt{nullptr, [&](const std::string& t, Pivot) {
                      ++calls;
                      return t;
                    }};
  Rng rng(2);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(back_translate("hello there", TextAugConfig{}, bt, rng), "hello there");
  EXPECT_EQ(calls, 0);
}

TEST(BackTranslation, MissWithoutProviderNamesThePair) {
  TranslationCache cache;
  TextAugConfig cfg;
  cfg.p_bt = 1.0;
  Rng rng(3);
  try {
    back_translate("unseen caption", cfg, BackTranslator{&cache, {}}, rng);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_NE(std::string(e.what()).find("unseen caption"), std::string::npos);
  }
}

TEST(BackTranslation, PivotsAreUniform) {
  std::map<Pivot, int> counts;
  BackTranslator bt{nullptr, [&](const std::string& t, Pivot p) {
                      ++counts[p];
                      return t;
                    }};
  TextAugConfig cfg;
  cfg.p_bt = 1.0;
  Rng rng(4);
  for (int i = 0; i < 30000; ++i) back_translate("x", cfg, bt, rng);
  for (Pivot p : kAllPivots) EXPECT_NEAR(counts[p] / 30000.0, 1.0 / 3.0, 0.02);
}

TEST(BackTranslation, SameSeedSameOutput) {
  TranslationCache cache;
  cache.insert("a b", Pivot::kGerman, "one");
  cache.insert("a b", Pivot::kFrench, "two");
  cache.insert("a b", Pivot::kSpanish, "three");
  TextAugConfig cfg;
  cfg.p_bt = 0.7;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r1(seed), r2(seed);
    const BackTranslator bt{&cache, {}};
    EXPECT_EQ(back_translate("a b", cfg, bt, r1), back_translate("a b", cfg, bt, r2));
  }
}

TEST(MockTranslator, RoundTripIsIdentityAndForwardIsNot) {
  const std::string text = "A dog barks at the mailman.";
  for (Pivot p : kAllPivots) {
    EXPECT_NE(MockTranslator::forward(text, p), text);
    EXPECT_EQ(MockTranslator{}(text, p), text);
  }
}

// ---------------------------------------------------------------------------
// Cache persistence

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

TEST(TranslationCache, SaveLoadRoundTripsBitExact) {
  TempDir dir("lbar_cache_rt");
  TranslationCache cache;
  cache.insert("Ünïcödé \"quoted\"\nline", Pivot::kSpanish, "résultat\t✓");
  cache.insert("plain", Pivot::kGerman, "schlicht");
  cache.save(dir.path / "c.jsonl");
  const auto back = TranslationCache::load(dir.path / "c.jsonl");
  EXPECT_EQ(back.entries(), cache.entries());
}

TEST(TranslationCache, CorruptLinesAreReported) {
  TempDir dir("lbar_cache_bad");
  std::ofstream(dir.path / "bad.jsonl") << TranslationCache::header().dump() << "\n{not json\n";
  EXPECT_THROW(TranslationCache::load(dir.path / "bad.jsonl"), PersistenceError);
  std::ofstream(dir.path / "pivot.jsonl") << R"({"source": "a", "pivot": "it", "result": "b"})" << "\n";
  EXPECT_THROW(TranslationCache::load(dir.path / "pivot.jsonl"), PersistenceError);
}

TEST(CacheBuild, CountsAndIdempotence) {
  TempDir dir("lbar_cache_build");
  const std::vector<std::string> caps{"first caption", "second one", "third"};
  int calls = 0;
  TranslationProvider provider = [&](const std::string& t, Pivot p) {
    ++calls;
    return MockTranslator{}(t, p);
  };
  const auto path = dir.path / "bt.jsonl";
  auto r = cache_build(caps, kAllPivots, provider, path);
  EXPECT_EQ(r.added, 9u);
  EXPECT_EQ(TranslationCache::load(path).size(), 9u);
  r = cache_build(caps, kAllPivots, provider, path);
  EXPECT_EQ(r.added, 0u);
  EXPECT_EQ(r.skipped, 9u);
  EXPECT_EQ(calls, 9);
}

TEST(CacheBuild, EmptyInputWritesHeaderOnly) {
  TempDir dir("lbar_cache_empty");
  const auto path = dir.path / "bt.jsonl";
  cache_build({}, kAllPivots, MockTranslator{}, path);
  std::ifstream in(path);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(nlohmann::json::parse(line), TranslationCache::header());
  EXPECT_FALSE(std::getline(in, line));
}

TEST(CacheBuild, ProviderFailureKeepsPartialCache) {
  TempDir dir("lbar_cache_fail");
  const std::vector<std::string> caps{"ok one", "breaks", "ok two"};
  TranslationProvider provider = [](const std::string& t, Pivot p) {
    if (t == "breaks") throw ServiceError("unreachable");
    return MockTranslator{}(t, p);
  };
  const auto r = cache_build(caps, kAllPivots, provider, dir.path / "bt.jsonl");
  EXPECT_EQ(r.added, 6u);
  ASSERT_EQ(r.failed.size(), 3u);
  EXPECT_EQ(r.failed.front().first, "breaks");
  EXPECT_EQ(TranslationCache::load(dir.path / "bt.jsonl").size(), 6u);
}

// ---------------------------------------------------------------------------
// EDA

const std::vector<std::string> kCorpus{"tree", "river", "bell"};

TEST(Eda, DeleteExampleFromTheTable) {
  TextAugConfig cfg;
  cfg.p_del = 0.2;
  const auto in = words("it rains cats and dogs");
  int seen = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Rng rng(seed);
    const auto out = eda_apply(EdaOp::kDelete, in, cfg, SynonymLexicon{}, kCorpus, rng);
    if (out.size() == 4 && std::find(out.begin(), out.end(), "dogs") == out.end()) {
      EXPECT_EQ(join_words(out), "it rains cats and");
      ++seen;
    }
  }
  EXPECT_GT(seen, 0);
}

TEST(Eda, ZeroProbabilityIsIdentity) {
  TextAugConfig cfg;
  cfg.p_syn = cfg.p_swp = cfg.p_ins = cfg.p_del = 0.3;
  Rng rng(5);
  const auto in = words("a quick brown fox");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(eda(in, cfg, SynonymLexicon{}, kCorpus, rng), in);
}

TEST(Eda, SynonymWithEmptyLexiconIsIdentity) {
  TextAugConfig cfg;
  cfg.p_syn = 0.3;
  Rng rng(6);
  const auto in = words("the rain pours down");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(eda_apply(EdaOp::kSynonym, in, cfg, SynonymLexicon{}, kCorpus, rng), in);
}

TEST(Eda, SynonymDrawsFromLexicon) {
  SynonymLexicon lex;
  lex.add("rains", {"drizzles", "pours"});
  TextAugConfig cfg;
  cfg.p_syn = 0.3;
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    seen.insert(eda_apply(EdaOp::kSynonym, words("it rains"), cfg, lex, kCorpus, rng)[1]);
  }
  EXPECT_EQ(seen, (std::set<std::string>{"rains", "drizzles", "pours"}));
}

TEST(Eda, DeleteSurvivalMatchesExpectation) {
  TextAugConfig cfg;
  cfg.p_del = 0.3;
  std::vector<std::string> in;
  for (int i = 0; i < 20; ++i) in.push_back("w" + std::to_string(i));
  Rng rng(7);
  double total = 0.0;
  for (int i = 0; i < 10000; ++i) total += double(eda_apply(EdaOp::kDelete, in, cfg, {}, kCorpus, rng).size());
  EXPECT_NEAR(total / 10000, 14.0, 0.1);
}

TEST(Eda, LengthAndMultisetProperties) {
  SynonymLexicon lex;
  lex.add("cat", {"kitty"});
  TextAugConfig cfg;
  cfg.p_eda = 1.0;
  cfg.p_syn = cfg.p_swp = cfg.p_ins = cfg.p_del = 0.3;
  Rng rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> in;
    const auto n = rng.uniform_int(0, 12);
    for (std::int64_t i = 0; i < n; ++i) in.push_back(i % 3 == 0 ? "cat" : "w" + std::to_string(i));
    for (EdaOp op : {EdaOp::kInsert, EdaOp::kDelete, EdaOp::kSwap, EdaOp::kSynonym}) {
      const auto out = eda_apply(op, in, cfg, lex, kCorpus, rng);
      switch (op) {
        case EdaOp::kInsert: EXPECT_GE(out.size(), in.size()); break;
        case EdaOp::kDelete: EXPECT_LE(out.size(), in.size()); break;
        case EdaOp::kSwap: {
          EXPECT_EQ(std::multiset<std::string>(out.begin(), out.end()),
                    std::multiset<std::string>(in.begin(), in.end()));
          break;
        }
        case EdaOp::kSynonym: EXPECT_EQ(out.size(), in.size()); break;
      }
    }
  }
}

TEST(Eda, InsertPlacesCorpusWordsAfterWords) {
  TextAugConfig cfg;
  cfg.p_ins = 0.3;
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const auto out = eda_apply(EdaOp::kInsert, words("a b c"), cfg, {}, kCorpus, rng);
    EXPECT_EQ(out.front(), "a");
    std::vector<std::string> kept;
    for (const auto& w : out)
      if (std::find(kCorpus.begin(), kCorpus.end(), w) == kCorpus.end()) kept.push_back(w);
    EXPECT_EQ(kept, words("a b c"));
  }
}

// ---------------------------------------------------------------------------
// Full caption pipeline

TEST(AugmentCaption, AllZeroIsPreprocessedInput) {
  Rng rng(10);
  EXPECT_EQ(augment_caption("The Rain, pours DOWN!", TextAugConfig{}, BackTranslator{}, {}, kCorpus, rng),
            "the rain pours down");
}

TEST(AugmentCaption, IdentityMockEqualsEdaOnlyPath) {
  TextAugConfig with_bt;
  with_bt.p_bt = 1.0;
  with_bt.p_eda = 1.0;
  with_bt.p_del = with_bt.p_swp = 0.3;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r1(seed), r2(seed);
    const auto a = augment_caption("A Dog barks, loudly.", with_bt, BackTranslator{nullptr, MockTranslator{}}, {},
                                   kCorpus, r1);
    // Replay the BT draws, then run EDA alone on the same stream.
    r2.bernoulli(1.0);
    r2.index(kAllPivots.size());
    const auto b = join_words(eda(words(preprocess_caption("A Dog barks, loudly.")), with_bt, {}, kCorpus, r2));
    EXPECT_EQ(a, b);
  }
}

TEST(AugmentCaption, OutputIsAlwaysPreprocessed) {
  SynonymLexicon lex;
  lex.add("dog", {"Hot-Dog", "pup"});
  TextAugConfig cfg;
  cfg.p_eda = 1.0;
  cfg.p_syn = 0.3;
  cfg.p_ins = 0.3;
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto out = augment_caption("The dog, the DOG!", cfg, BackTranslator{}, lex, kCorpus, rng);
    EXPECT_EQ(preprocess_caption(out), out);
  }
}

TEST(AugmentCaption, FixedSeedIsStable) {
  TextAugConfig cfg;
  cfg.p_eda = 0.8;
  cfg.p_ins = cfg.p_del = 0.2;
  Rng r1(42), r2(42);
  EXPECT_EQ(augment_caption("one two three four", cfg, BackTranslator{}, {}, kCorpus, r1),
            augment_caption("one two three four", cfg, BackTranslator{}, {}, kCorpus, r2));
}

// ---------------------------------------------------------------------------
// HTTP provider against an in-process server speaking the same schema

TEST(HttpTranslator, TwoLegRoundTripAndErrors) {
  httplib::Server server;
  std::vector<nlohmann::json> requests;
  server.Post("/translate", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    requests.push_back(body);
    const std::string q = body.at("q");
    if (q == "fail") {
      res.status = 500;
      res.set_content("boom", "text/plain");
      return;
    }
    const std::string out = body.at("target") == "en" ? q.substr(3) : body.at("target").get<std::string>() + ":" + q;
    res.set_content(nlohmann::json{{"translatedText", out}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const HttpTranslator http("http://127.0.0.1:" + std::to_string(port), "secret", 5);
  EXPECT_EQ(http("hello world", Pivot::kFrench), "hello world");
  ASSERT_EQ(requests.size(), 2u);
  EXPECT_EQ(requests[0]["source"], "en");
  EXPECT_EQ(requests[0]["target"], "fr");
  EXPECT_EQ(requests[0]["api_key"], "secret");
  EXPECT_EQ(requests[1]["source"], "fr");
  EXPECT_EQ(requests[1]["target"], "en");
  EXPECT_THROW(http("fail", Pivot::kGerman), ServiceError);

  server.stop();
  worker.join();
  EXPECT_THROW(http("hello", Pivot::kGerman), ServiceError);
}

TEST(HttpTranslator, FromEnvRequiresUrl) {
  ::unsetenv(kTranslateUrlEnv);
  EXPECT_THROW(HttpTranslator::from_env(), ServiceError);
}

}  // namespace
}  // namespace lbar
