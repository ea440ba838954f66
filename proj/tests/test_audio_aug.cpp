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

#include <cmath>
#include <vector>

#include "lbar/audio_aug.hpp"

namespace lbar {
namespace {

MelSpectrogram random_mel(Rng& rng, int n_mels, int frames, int valid) {
  MelSpectrogram m;
  m.values = Eigen::MatrixXd::Zero(n_mels, frames);
  for (int b = 0; b < n_mels; ++b)
    for (int t = 0; t < valid; ++t) m.values(b, t) = rng.normal(0.5 * b, 1.0 + 0.05 * b);
  m.n_frames_valid = valid;
  return m;
}

TEST(AudioAugConfig, RangesAreEnforced) {
  AudioAugConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_TRUE(c.is_identity());
  c.g_max = 7;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.w_t = 65;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Gain

TEST(Gain, ZeroRangeAlwaysZero) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_gain(rng, 0), 0.0);
}

TEST(Gain, UniformDrawsAreCenteredAndBounded) {
  Rng rng(2);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += sample_gain(rng, 6);
  EXPECT_NEAR(sum / 100000, 0.0, 0.05);
  for (int i = 0; i < 10000; ++i) {
    const double g = sample_gain(rng, 3);
    EXPECT_GE(g, -3.0);
    EXPECT_LE(g, 3.0);
  }
}

TEST(Gain, Factors) {
  EXPECT_EQ(gain_factor(0.0), 1.0);
  EXPECT_NEAR(gain_factor(20.0), 10.0, 1e-12);
  EXPECT_NEAR(gain_factor(6.0), 1.995262, 1e-6);
}

TEST(Gain, ZeroIsBitIdenticalAndGainsCompose) {
  Rng rng(3);
  Waveform w{std::vector<double>(500), 32000};
  for (auto& s : w.samples) s = rng.normal(0.0, 0.3);
  EXPECT_EQ(apply_gain(w, 0.0).samples, w.samples);
  const auto twice = apply_gain(apply_gain(w, 2.5), -4.0);
  const auto once = apply_gain(w, -1.5);
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(twice.samples[i], once.samples[i], 1e-12);
}

// ---------------------------------------------------------------------------
// SpecAugment

TEST(SpecAugment, ZeroStripesIsIdentity) {
  Rng rng(4);
  const auto m = random_mel(rng, 64, 50, 50);
  EXPECT_EQ(spec_augment(m, 0, 8, 0, 8, rng).values, m.values);
}

TEST(SpecAugment, SingleFrequencyStripeIsOneContiguousBand) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng data(seed);
    MelSpectrogram m = random_mel(data, 64, 40, 30);
    m.values.leftCols(30).array() += 100.0;  // no accidental zeros in valid cells
    Rng rng(seed);
    const auto out = spec_augment(m, 1, 4, 0, 1, rng);
    std::vector<int> zero_rows;
    for (int b = 0; b < 64; ++b) {
      const auto row = out.values.row(b).head(30);
      if (row.cwiseAbs().maxCoeff() == 0.0) zero_rows.push_back(b);
      else EXPECT_EQ(row, m.values.row(b).head(30));
    }
    ASSERT_GE(zero_rows.size(), 1u);
    ASSERT_LE(zero_rows.size(), 4u);
    EXPECT_EQ(zero_rows.back() - zero_rows.front() + 1, int(zero_rows.size()));
  }
}

TEST(SpecAugment, MasksStayInsideValidFramesAndAreZero) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int valid = int(rng.uniform_int(1, 60));
    MelSpectrogram m = random_mel(rng, 16, 60, valid);
    m.values.rightCols(60 - valid).setConstant(7.0);  // sentinel padding
    const int n_t = int(rng.uniform_int(0, 8)), w_t = int(rng.uniform_int(1, 64));
    const int n_f = int(rng.uniform_int(0, 1)), w_f = int(rng.uniform_int(1, 32));
    const auto out = spec_augment(m, n_f, w_f, n_t, w_t, rng);
    EXPECT_EQ(out.values.rightCols(60 - valid), m.values.rightCols(60 - valid));
    for (Eigen::Index i = 0; i < out.values.size(); ++i)
      if (out.values(i) != m.values(i)) {
        EXPECT_EQ(out.values(i), 0.0);
      }
  }
}

TEST(SpecAugment, StripeWidthsClampToDimension) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const auto s = draw_stripe(rng, 64, 10);
    EXPECT_GE(s.width, 1);
    EXPECT_LE(s.width, 10);
    EXPECT_GE(s.offset, 0);
    EXPECT_LE(s.offset + s.width, 10);
  }
}

// ---------------------------------------------------------------------------
// Freq-MixStyle

TEST(MixStyle, FoldedWeightNeverBelowHalf) {
  Rng rng(7);
  for (double alpha : {0.1, 0.5, 1.0})
    for (int i = 0; i < 20000; ++i) EXPECT_GE(draw_mix_weight(rng, alpha), 0.5);
}

TEST(MixStyle, ZeroProbabilityIsIdentity) {
  Rng rng(8);
  std::vector<MelSpectrogram> batch{random_mel(rng, 8, 20, 20), random_mel(rng, 8, 20, 15)};
  const auto before = batch;
  freq_mixstyle(batch, 0.3, 0.0, rng);
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(batch[i].values, before[i].values);
}

TEST(MixStyle, LambdaOneIsIdentity) {
  Rng rng(9);
  auto a = random_mel(rng, 8, 25, 25);
  const auto b = random_mel(rng, 8, 25, 25);
  const auto before = a.values;
  mix_statistics(a, bin_stats(a), bin_stats(b), 1.0);
  EXPECT_LT((a.values - before).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(MixStyle, HalfLambdaArithmetic) {
  // Bin statistics mu_i = 2, sigma_i = 1 and mu_j = 4, sigma_j = 3.
  MelSpectrogram a, b;
  a.values.resize(1, 2);
  a.values << 1.0, 3.0;
  a.n_frames_valid = 2;
  b.values.resize(1, 2);
  b.values << 1.0, 7.0;
  b.n_frames_valid = 2;
  const auto sa = bin_stats(a), sb = bin_stats(b);
  EXPECT_DOUBLE_EQ(sa.mean(0), 2.0);
  EXPECT_DOUBLE_EQ(sa.std_dev(0), 1.0);
  EXPECT_DOUBLE_EQ(sb.mean(0), 4.0);
  EXPECT_DOUBLE_EQ(sb.std_dev(0), 3.0);
  mix_statistics(a, sa, sb, 0.5);
  const auto out = bin_stats(a);
  EXPECT_NEAR(out.mean(0), 3.0, 1e-9);
  EXPECT_NEAR(out.std_dev(0), 2.0, 1e-5);
}

TEST(MixStyle, OutputStatisticsMatchMixedTargets) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_mel(rng, 12, 40, int(rng.uniform_int(5, 40)));
    const auto b = random_mel(rng, 12, 40, int(rng.uniform_int(5, 40)));
    const auto sa = bin_stats(a), sb = bin_stats(b);
    const double lambda = draw_mix_weight(rng, 0.4);
    mix_statistics(a, sa, sb, lambda);
    const auto out = bin_stats(a);
    for (int k = 0; k < 12; ++k) {
      EXPECT_NEAR(out.mean(k), lambda * sa.mean(k) + (1 - lambda) * sb.mean(k), 1e-9);
      EXPECT_NEAR(out.std_dev(k), lambda * sa.std_dev(k) + (1 - lambda) * sb.std_dev(k), 1e-5);
    }
  }
}

TEST(MixStyle, PaddingIsUntouched) {
  Rng rng(11);
  std::vector<MelSpectrogram> batch{random_mel(rng, 6, 30, 10), random_mel(rng, 6, 30, 30),
                                    random_mel(rng, 6, 30, 20)};
  freq_mixstyle(batch, 0.5, 1.0, rng);
  EXPECT_EQ(batch[0].values.rightCols(20).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(batch[2].values.rightCols(10).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MixStyle, SingleItemBatchIsUntouched) {
  Rng rng(12);
  std::vector<MelSpectrogram> batch{random_mel(rng, 6, 30, 30)};
  const auto before = batch[0].values;
  freq_mixstyle(batch, 0.5, 1.0, rng);
  EXPECT_EQ(batch[0].values, before);
}

}  // namespace
}  // namespace lbar
