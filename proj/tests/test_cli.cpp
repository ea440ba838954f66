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
#include <sstream>

#include "lbar/cli.hpp"

namespace lbar::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lbar_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // A small synthetic run; `extra` is merged over the defaults.
  std::string write_config(const nlohmann::json& extra = nlohmann::json::object(), const std::string& name = "c.json") {
    nlohmann::json j = {
        {"data", {{"n_classes", 4}, {"n_train", 16}, {"n_val", 8}, {"n_test", 8}}},
        {"model", {{"embed_dim", 12}, {"audio_hidden", 16}, {"text_hidden", 16}, {"token_embed_dim", 12}}},
        {"optim", {{"epochs", 3}, {"batch_size", 8}, {"lr0", 1e-3}}},
        {"paths", {{"out_dir", (dir_ / "run").string()}}},
        {"seed", 5}};
    j.merge_patch(extra);
    const auto path = dir_ / name;
    std::ofstream(path) << j.dump(2);
    return path.string();
  }

  int run(const std::function<int(Streams)>& f) {
    out_.str("");
    err_.str("");
    return f(Streams{out_, err_});
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

// ---------------------------------------------------------------------------
// train / eval

TEST_F(CliTest, TrainWritesArtifactsAndIsReproducible) {
  const auto cfg = write_config();
  ASSERT_EQ(run([&](Streams io) { return cmd_train({cfg, {}, 1}, io); }), kOk) << err_.str();
  for (const char* f : {"metrics.csv", "result.json", "checkpoint.json"}) EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  const auto first = slurp(dir_ / "run" / "metrics.csv");
  const auto result = nlohmann::json::parse(slurp(dir_ / "run" / "result.json"));
  EXPECT_EQ(result["epochs_run"], 3);
  EXPECT_TRUE(result.contains("test"));
  EXPECT_EQ(result["config_hash"], config_hash(load_run_config(cfg)));
  EXPECT_NE(out_.str().find("mAP@10"), std::string::npos);

  ASSERT_EQ(run([&](Streams io) { return cmd_train({cfg, {}, 1}, io); }), kOk);
  EXPECT_EQ(slurp(dir_ / "run" / "metrics.csv"), first);
}

TEST_F(CliTest, TrainOverridesAndConfigErrors) {
  const auto cfg = write_config();
  EXPECT_EQ(run([&](Streams io) { return cmd_train({cfg, {"optim.epochs=1"}, 1}, io); }), kOk) << err_.str();
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "run" / "result.json"))["epochs_run"], 1);
  EXPECT_EQ(run([&](Streams io) { return cmd_train({cfg, {"optim.bogus=1"}, 1}, io); }), kUsage);
  EXPECT_NE(err_.str().find("optim.bogus"), std::string::npos);
  EXPECT_EQ(run([&](Streams io) { return cmd_train({(dir_ / "none.json").string(), {}, 1}, io); }), kUsage);
  const auto bad = write_config({{"audio_aug", {{"w_t", 0}}}}, "bad.json");
  EXPECT_EQ(run([&](Streams io) { return cmd_train({bad, {}, 1}, io); }), kUsage);
  EXPECT_NE(err_.str().find("audio_aug.w_t"), std::string::npos);
}

TEST_F(CliTest, EvalCheckpointAndRandomInit) {
  const auto cfg = write_config();
  ASSERT_EQ(run([&](Streams io) { return cmd_train({cfg, {}, 1}, io); }), kOk);
  EvalOptions e;
  e.config = cfg;
  e.checkpoint = (dir_ / "run" / "checkpoint.json").string();
  ASSERT_EQ(run([&](Streams io) { return cmd_eval(e, io); }), kOk) << err_.str();
  const auto sidecar = nlohmann::json::parse(slurp(dir_ / "run" / "eval_test.json"));
  EXPECT_EQ(sidecar["n_queries"], 8 * 5);
  EXPECT_EQ(sidecar["split"], "test");

  EvalOptions r;
  r.config = cfg;
  r.random_init = true;
  r.split = "val";
  r.json_out = (dir_ / "rand.json").string();
  ASSERT_EQ(run([&](Streams io) { return cmd_eval(r, io); }), kOk) << err_.str();
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "rand.json"))["checkpoint"], "random-init");
}

TEST_F(CliTest, EvalErrors) {
  const auto cfg = write_config();
  ASSERT_EQ(run([&](Streams io) { return cmd_train({cfg, {}, 1}, io); }), kOk);
  EvalOptions e;
  e.config = cfg;
  e.checkpoint = (dir_ / "run" / "checkpoint.json").string();
  e.overrides = {"data.n_test=0"};
  EXPECT_EQ(run([&](Streams io) { return cmd_eval(e, io); }), kUsage);
  e.overrides = {"features.n_mels=32", "model.n_mels=32"};
  EXPECT_EQ(run([&](Streams io) { return cmd_eval(e, io); }), kUsage);
  EXPECT_NE(err_.str().find("features.n_mels"), std::string::npos);
  e.overrides = {};
  e.split = "dev";
  EXPECT_EQ(run([&](Streams io) { return cmd_eval(e, io); }), kUsage);
  e.split = "test";
  std::ofstream(dir_ / "broken.json") << "{\"version\": 1, ";
  e.checkpoint = (dir_ / "broken.json").string();
  EXPECT_EQ(run([&](Streams io) { return cmd_eval(e, io); }), kCorrupt);
  e.checkpoint.clear();
  EXPECT_EQ(run([&](Streams io) { return cmd_eval(e, io); }), kUsage);
}

// ---------------------------------------------------------------------------
// smbo

TEST_F(CliTest, SmboToyObjectiveInterruptAndResume) {
  const auto cfg = write_config();
  SmboOptions o;
  o.config = cfg;
  o.objective = "synthetic-quadratic";
  o.n_init = 4;
  o.n_trials = 12;
  o.max_new_trials = 5;
  ASSERT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kOk) << err_.str();
  EXPECT_NE(out_.str().find("5 of 12 trials"), std::string::npos) << out_.str();
  EXPECT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kUsage);
  o.resume = true;
  o.max_new_trials.reset();
  ASSERT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kOk) << err_.str();
  EXPECT_NE(out_.str().find("resumed after 5"), std::string::npos);
  EXPECT_NE(out_.str().find("12 of 12 trials"), std::string::npos);
  EXPECT_NE(out_.str().find("parameter"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "smbo_best.json"));

  const auto interrupted = slurp(dir_ / "run" / "trials.jsonl");
  fs::remove(dir_ / "run" / "trials.jsonl");
  o.resume = false;
  ASSERT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kOk);
  EXPECT_EQ(slurp(dir_ / "run" / "trials.jsonl"), interrupted);
}

TEST_F(CliTest, SmboErrors) {
  const auto cfg = write_config();
  SmboOptions o;
  o.config = cfg;
  o.objective = "synthetic-quadratic";
  o.n_trials = 0;
  EXPECT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kUsage);
  o.n_trials = 4;
  o.n_init = 2;
  o.objective = "nonsense";
  EXPECT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kUsage);
  o.objective = "synthetic-quadratic";
  fs::create_directories(dir_ / "run");
  std::ofstream(dir_ / "run" / "trials.jsonl") << "{\"schema\": 1, \"trial_id\": 0\n";
  o.resume = true;
  EXPECT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kCorrupt);
  o.space = (dir_ / "missing_space.json").string();
  o.objective = "train";
  fs::remove(dir_ / "run" / "trials.jsonl");
  EXPECT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kUsage);
}

TEST_F(CliTest, SmboTrainingObjective) {
  const auto cfg = write_config({{"optim", {{"epochs", 2}}}, {"text_aug", {{"bt_provider", "mock"}}}});
  SmboOptions o;
  o.config = cfg;
  o.n_init = 2;
  o.n_trials = 3;
  ASSERT_EQ(run([&](Streams io) { return cmd_smbo(o, io); }), kOk) << err_.str();
  const auto trials = read_trial_log(dir_ / "run" / "trials.jsonl", SearchSpace::augmentation_default());
  ASSERT_EQ(trials.size(), 3u);
  for (const auto& t : trials) EXPECT_EQ(t.status, TrialStatus::kCompleted) << t.error;
  EXPECT_EQ(trials[2].sampler, "tpe");
}

// ---------------------------------------------------------------------------
// augment-preview

TEST_F(CliTest, TextPreviewStagesAndDeterminism) {
  const auto cfg = write_config({{"text_aug", {{"p_EDA", 1.0}, {"p_ins", 0.3}, {"p_del", 0.3}, {"p_swp", 0.3}, {"p_syn", 0.3}}}});
  PreviewOptions p;
  p.config = cfg;
  p.mode = "text";
  p.text = "The rain pours down, loudly!";
  p.seed = 3;
  ASSERT_EQ(run([&](Streams io) { return cmd_augment_preview(p, io); }), kOk) << err_.str();
  const std::string first = out_.str();
  std::istringstream lines(first);
  std::vector<std::string> labels;
  for (std::string l; std::getline(lines, l);) labels.push_back(l.substr(0, l.find(' ')));
  EXPECT_EQ(labels, (std::vector<std::string>{"Original", "BT", "Insert", "Delete", "Swap", "Synonym"}));
  EXPECT_EQ(first.substr(0, first.find('\n')), "Original the rain pours down loudly");
  ASSERT_EQ(run([&](Streams io) { return cmd_augment_preview(p, io); }), kOk);
  EXPECT_EQ(out_.str(), first);
}

TEST_F(CliTest, TextPreviewAllZeroIsIdentity) {
  const auto cfg = write_config();
  PreviewOptions p;
  p.config = cfg;
  p.mode = "text";
  std::ofstream(dir_ / "caps.txt") << "A dog barks.\n\nBirds sing at dawn\n";
  p.input = (dir_ / "caps.txt").string();
  ASSERT_EQ(run([&](Streams io) { return cmd_augment_preview(p, io); }), kOk) << err_.str();
  std::istringstream lines(out_.str());
  std::vector<std::string> texts;
  for (std::string l; std::getline(lines, l);)
    if (!l.empty()) texts.push_back(l.substr(9));
  ASSERT_EQ(texts.size(), 12u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(texts[i], "a dog barks");
  for (std::size_t i = 6; i < 12; ++i) EXPECT_EQ(texts[i], "birds sing at dawn");
}

TEST_F(CliTest, AudioPreviewWritesBeforeAndAfter) {
  const auto cfg = write_config({{"audio_aug", {{"g_max", 6}, {"n_t", 2}, {"w_t", 5}}}});
  write_manifest(synth_dataset(2, 1, 0), dir_ / "wav", "manifest.csv");
  fs::path wav;
  for (const auto& e : fs::directory_iterator(dir_ / "wav"))
    if (e.path().extension() == ".wav") wav = e.path();
  ASSERT_FALSE(wav.empty());
  PreviewOptions p;
  p.config = cfg;
  p.mode = "audio";
  p.input = wav.string();
  p.out_dir = (dir_ / "prev").string();
  ASSERT_EQ(run([&](Streams io) { return cmd_augment_preview(p, io); }), kOk) << err_.str();
  const auto stem = wav.stem().string();
  EXPECT_TRUE(fs::exists(dir_ / "prev" / (stem + "_before.csv")));
  EXPECT_TRUE(fs::exists(dir_ / "prev" / (stem + "_after.csv")));
  EXPECT_NE(slurp(dir_ / "prev" / (stem + "_before.csv")), slurp(dir_ / "prev" / (stem + "_after.csv")));
}

TEST_F(CliTest, PreviewUsageErrors) {
  const auto cfg = write_config();
  PreviewOptions p;
  p.config = cfg;
  p.mode = "video";
  EXPECT_EQ(run([&](Streams io) { return cmd_augment_preview(p, io); }), kUsage);
  p.mode = "audio";
  p.input = (dir_ / "nothing.wav").string();
  EXPECT_EQ(run([&](Streams io) { return cmd_augment_preview(p, io); }), kUsage);
  std::ofstream(dir_ / "junk.wav") << "not a wav file at all";
  p.input = (dir_ / "junk.wav").string();
  EXPECT_EQ(run([&](Streams io) { return cmd_augment_preview(p, io); }), kUsage);
}

// ---------------------------------------------------------------------------
// bt-cache / synth-data

TEST_F(CliTest, BtCacheMockIsIncremental) {
  std::ofstream(dir_ / "caps.txt") << "first caption\nsecond caption\r\nthird\n";
  const BtCacheOptions o{(dir_ / "caps.txt").string(), (dir_ / "bt.jsonl").string(), true};
  ASSERT_EQ(run([&](Streams io) { return cmd_bt_cache(o, io); }), kOk) << err_.str();
  EXPECT_EQ(out_.str(), "9 new entries (0 already cached)\n");
  ASSERT_EQ(run([&](Streams io) { return cmd_bt_cache(o, io); }), kOk);
  EXPECT_EQ(out_.str(), "0 new entries (9 already cached)\n");
  EXPECT_EQ(TranslationCache::load(o.out).size(), 9u);
}

TEST_F(CliTest, BtCacheEmptyInputAndManifest) {
  std::ofstream(dir_ / "empty.txt") << "";
  ASSERT_EQ(run([&](Streams io) { return cmd_bt_cache({(dir_ / "empty.txt").string(), (dir_ / "e.jsonl").string(), true}, io); }),
            kOk);
  EXPECT_EQ(out_.str(), "0 new entries (0 already cached)\n");
  ASSERT_EQ(run([&](Streams io) { return cmd_synth_data({(dir_ / "synth").string(), 3, 4, 0, 0, 1}, io); }), kOk);
  ASSERT_EQ(run([&](Streams io) {
              return cmd_bt_cache({(dir_ / "synth" / "train" / "manifest.csv").string(), (dir_ / "m.jsonl").string(), true}, io);
            }),
            kOk)
      << err_.str();
  EXPECT_GT(TranslationCache::load(dir_ / "m.jsonl").size(), 0u);
}

TEST_F(CliTest, BtCacheUnreachableServiceIsExitFour) {
  std::ofstream(dir_ / "caps.txt") << "one caption\n";
  ::setenv(kTranslateUrlEnv, "http://127.0.0.1:9", 1);
  const BtCacheOptions o{(dir_ / "caps.txt").string(), (dir_ / "bt.jsonl").string(), false};
  EXPECT_EQ(run([&](Streams io) { return cmd_bt_cache(o, io); }), kService);
  EXPECT_TRUE(fs::exists(o.out));
  ::unsetenv(kTranslateUrlEnv);
  EXPECT_EQ(run([&](Streams io) { return cmd_bt_cache(o, io); }), kService);
}

TEST_F(CliTest, BtCacheCorruptExistingCacheIsExitThree) {
  std::ofstream(dir_ / "caps.txt") << "one caption\n";
  std::ofstream(dir_ / "bt.jsonl") << "{\"format\": \"lbar-translation-cache\", \"version\": 1}\n{oops\n";
  EXPECT_EQ(run([&](Streams io) { return cmd_bt_cache({(dir_ / "caps.txt").string(), (dir_ / "bt.jsonl").string(), true}, io); }),
            kCorrupt);
}

TEST_F(CliTest, SynthDataWritesLoadableManifests) {
  ASSERT_EQ(run([&](Streams io) { return cmd_synth_data({(dir_ / "s").string(), 3, 5, 2, 1, 4}, io); }), kOk);
  const auto train = load_manifest(dir_ / "s" / "train" / "manifest.csv", Split::kTrain);
  ASSERT_EQ(train.size(), 5u);
  const auto expected = synth_dataset(3, 5, 4, Split::kTrain);
  EXPECT_EQ(train.items[0].captions, expected.items[0].captions);
  EXPECT_EQ(train.items[0].audio.samples, expected.items[0].audio.samples);
  EXPECT_EQ(run([&](Streams io) { return cmd_synth_data({(dir_ / "s").string(), 1, 5, 2, 1, 4}, io); }), kUsage);
}

TEST_F(CliTest, ManifestConfigTrainsEndToEnd) {
  ASSERT_EQ(run([&](Streams io) { return cmd_synth_data({(dir_ / "m").string(), 3, 9, 6, 6, 2}, io); }), kOk);
  const auto cfg = write_config({{"data",
                                  {{"source", "manifest"},
                                   {"train", (dir_ / "m" / "train" / "manifest.csv").string()},
                                   {"val", (dir_ / "m" / "val" / "manifest.csv").string()},
                                   {"test", (dir_ / "m" / "test" / "manifest.csv").string()}}},
                                 {"optim", {{"epochs", 1}, {"batch_size", 4}}}});
  EXPECT_EQ(run([&](Streams io) { return cmd_train({cfg, {}, 2}, io); }), kOk) << err_.str();
}

}  // namespace
}  // namespace lbar::cli
