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

#include "lbar/trainer.hpp"
#include "oracles.hpp"

namespace lbar {
namespace {

struct SmallData {
  PairedDataset train = synth_dataset(4, 24, 1, Split::kTrain);
  PairedDataset val = synth_dataset(4, 12, 2, Split::kVal);
};

const SmallData& data() {
  static const SmallData d;
  return d;
}

TrainSetup small_setup(std::uint64_t seed, int epochs = 3) {
  TrainSetup s;
  s.dims.embed_dim = 16;
  s.dims.audio_hidden = 24;
  s.dims.text_hidden = 24;
  s.dims.token_embed_dim = 16;
  s.optim.epochs = epochs;
  s.optim.batch_size = 8;
  s.optim.lr0 = 1e-3;
  s.optim.seed = seed;
  return s;
}

// ---------------------------------------------------------------------------
// Schedule and optimizer

TEST(LrSchedule, StepDecayValues) {
  const OptimConfig cfg;
  EXPECT_EQ(lr_at(0, cfg), 1e-4);
  EXPECT_EQ(lr_at(9, cfg), 1e-4);
  EXPECT_EQ(lr_at(10, cfg), 1e-4 / 3.0);
  EXPECT_EQ(lr_at(20, cfg), 1e-4 / 9.0);
  EXPECT_EQ(lr_at(49, cfg), 1e-4 / 81.0);
  EXPECT_THROW(lr_at(-1, cfg), std::invalid_argument);
}

TEST(LrSchedule, NonIncreasing) {
  OptimConfig cfg;
  for (double f : {1.0, 1.5, 3.0, 10.0})
    for (int every : {1, 3, 10}) {
      cfg.lr_drop_factor = f;
      cfg.lr_drop_every = every;
      for (int e = 0; e < 100; ++e) EXPECT_LE(lr_at(e + 1, cfg), lr_at(e, cfg));
    }
}

TEST(Adam, FirstStepIsLrTimesSign) {
  const auto d = testing::small_dims();
  ModelParams p = init_params(d, 0);
  const ModelParams start = p;
  GradientSet g = GradientSet::zeros_like(p);
  Rng rng(1);
  for_each_array(g, [&](const char*, Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(0.5) ? rng.uniform(0.1, 2.0) : -rng.uniform(0.1, 2.0);
  });
  AdamState state;
  const OptimConfig cfg;
  adam_step(p, g, state, 1e-3, cfg);
  EXPECT_EQ(state.step, 1);
  const ParamArrays& before = start;
  auto check = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& grad) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double sign = grad.data()[i] > 0 ? 1.0 : -1.0;
      EXPECT_NEAR(a.data()[i] - b.data()[i], -1e-3 * sign, 1e-10);
    }
  };
  check(p.w1, before.w1, g.w1);
  check(p.b2, before.b2, g.b2);
  check(p.embedding, before.embedding, g.embedding);
  check(p.w4, before.w4, g.w4);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  ModelParams p = init_params(testing::small_dims(), 2);
  const ModelParams start = p;
  AdamState state = AdamState::zeros_like(p);
  for (int i = 0; i < 5; ++i) adam_step(p, GradientSet::zeros_like(p), state, 1e-2, OptimConfig{});
  for_each_array_pair(p, start, [](const char* n, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    EXPECT_EQ(a, b) << n;
  });
}

TEST(Adam, SecondMomentGrowsWithSignal) {
  ModelParams p = init_params(testing::small_dims(), 3);
  GradientSet g = GradientSet::zeros_like(p);
  g.w2.setConstant(0.5);
  AdamState state;
  adam_step(p, g, state, 1e-3, OptimConfig{});
  const double v1 = state.v.w2(0, 0);
  adam_step(p, g, state, 1e-3, OptimConfig{});
  EXPECT_GT(state.v.w2(0, 0), v1);
}

TEST(Adam, NonFiniteGradientThrows) {
  ModelParams p = init_params(testing::small_dims(), 4);
  GradientSet g = GradientSet::zeros_like(p);
  g.b3(0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamState state;
  EXPECT_THROW(adam_step(p, g, state, 1e-3, OptimConfig{}), std::domain_error);
  g.b3(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(adam_step(p, g, state, 1e-3, OptimConfig{}), std::domain_error);
}

// ---------------------------------------------------------------------------
// Early stopping

TEST(EarlyStopping, StrictlyDecreasingCurveStopsAfterPatience) {
  for (int patience : {1, 3, 10}) {
    EarlyStopping s(patience);
    int stopped_at = -1;
    for (int e = 0; e < 100; ++e)
      if (s.update(e, 1.0 - 0.01 * e)) {
        stopped_at = e;
        break;
      }
    EXPECT_EQ(s.best_epoch(), 0);
    EXPECT_EQ(stopped_at, patience);
  }
}

TEST(EarlyStopping, TiesDoNotCountAsImprovement) {
  EarlyStopping s(2);
  EXPECT_FALSE(s.update(0, 0.5));
  EXPECT_FALSE(s.update(1, 0.5));
  EXPECT_TRUE(s.update(2, 0.5));
  EXPECT_EQ(s.best_epoch(), 0);
}

TEST(EarlyStopping, NeverFiresBeforePatience) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int patience = int(rng.uniform_int(1, 12));
    EarlyStopping s(patience);
    for (int e = 0; e < 60; ++e) {
      if (s.update(e, rng.uniform())) {
        EXPECT_GE(e, patience);
        EXPECT_EQ(e - s.best_epoch(), patience);
        break;
      }
    }
  }
}

TEST(TrainRun, ScriptedDecliningValidationStopsAtBestPlusPatience) {
  auto setup = small_setup(0, 50);
  TrainHooks hooks;
  hooks.validate = [](int epoch, const Checkpoint&) { return 0.9 - 0.01 * epoch; };
  const auto out = train_run(data().train, PairedDataset{}, setup, {}, hooks);
  EXPECT_TRUE(out.result.stopped_early);
  EXPECT_EQ(out.result.best_epoch, 0);
  EXPECT_EQ(out.result.epochs_run(), 0 + 10 + 1);
  EXPECT_DOUBLE_EQ(out.result.best_val_map, 0.9);
}

// ---------------------------------------------------------------------------
// Training runs

TEST(TrainRun, IdentityAugmentationMatchesDisabledAugmentation) {
  auto on = small_setup(5);
  auto off = on;
  off.augment = false;
  const auto a = train_run(data().train, data().val, on, {});
  const auto b = train_run(data().train, data().val, off, {});
  EXPECT_EQ(a.result.train_loss, b.result.train_loss);
  EXPECT_EQ(a.result.val_map, b.result.val_map);
}

TEST(TrainRun, SameSeedIsBitIdentical) {
  auto setup = small_setup(9);
  setup.audio_aug.g_max = 6;
  setup.audio_aug.n_t = 2;
  setup.audio_aug.w_t = 8;
  setup.audio_aug.p_ms = 0.5;
  setup.audio_aug.alpha = 0.3;
  setup.text_aug.p_eda = 0.5;
  setup.text_aug.p_del = 0.1;
  setup.text_aug.p_swp = 0.1;
  const auto a = train_run(data().train, data().val, setup, {});
  const auto b = train_run(data().train, data().val, setup, {});
  EXPECT_EQ(metrics_csv(a.result, "h"), metrics_csv(b.result, "h"));
  setup.optim.seed = 10;
  const auto c = train_run(data().train, data().val, setup, {});
  EXPECT_NE(a.result.train_loss, c.result.train_loss);
}

TEST(TrainRun, LossDecreases) {
  auto setup = small_setup(3, 10);
  const auto out = train_run(data().train, data().val, setup, {});
  ASSERT_EQ(out.result.epochs_run(), 10);
  EXPECT_LT(out.result.train_loss.back(), out.result.train_loss.front());
}

TEST(TrainRun, CheckpointHoldsBestEpoch) {
  const auto path = std::filesystem::temp_directory_path() / "lbar_train_ckpt.json";
  auto setup = small_setup(4, 4);
  TrainHooks hooks;
  hooks.checkpoint_path = path;
  hooks.validate = [](int epoch, const Checkpoint&) { return epoch == 1 ? 1.0 : 0.1; };
  const auto out = train_run(data().train, PairedDataset{}, setup, {}, hooks);
  const auto saved = load_checkpoint(path);
  EXPECT_EQ(out.result.best_epoch, 1);
  EXPECT_EQ(saved.params.w1, out.best.params.w1);
  EXPECT_EQ(saved.vocab.size(), out.best.vocab.size());
  std::filesystem::remove(path);
}

TEST(TrainRun, FailureCarriesPartialResult) {
  auto setup = small_setup(1, 5);
  TrainHooks hooks;
  hooks.validate = [](int epoch, const Checkpoint&) -> double {
    if (epoch == 2) throw std::runtime_error("validation backend lost");
    return 0.5;
  };
  try {
    train_run(data().train, PairedDataset{}, setup, {}, hooks);
    FAIL();
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.partial().epochs_run(), 2);
    EXPECT_EQ(e.partial().error, "validation backend lost");
  }
}

TEST(TrainRun, RejectsBadInputs) {
  auto setup = small_setup(0);
  setup.dims.n_mels = 32;
  EXPECT_THROW(train_run(data().train, data().val, setup, {}), ConfigError);
  setup = small_setup(0);
  EXPECT_THROW(train_run(synth_dataset(2, 1, 0), data().val, setup, {}), std::invalid_argument);
  EXPECT_THROW(train_run(data().train, PairedDataset{}, setup, {}), std::invalid_argument);
  setup.optim.batch_size = 1;
  EXPECT_THROW(train_run(data().train, data().val, setup, {}), ConfigError);
}

TEST(MetricsCsv, Layout) {
  RunResult r;
  r.lr = {1e-4, 1e-4};
  r.train_loss = {2.5, 0.1};
  r.val_map = {0.125, 0.25};
  EXPECT_EQ(metrics_csv(r, "abc"),
            "# config_hash=abc\nepoch,lr,train_loss,val_map10\n"
            "0,0.0001,2.5,0.125\n1,0.0001,0.10000000000000001,0.25\n");
}

}  // namespace
}  // namespace lbar
