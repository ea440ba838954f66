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

// Audio augmentations: waveform gain, SpecAugment stripe masking and
// Freq-MixStyle statistics mixing.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "lbar/data/features.hpp"
#include "lbar/data/waveform.hpp"
#include "lbar/error.hpp"
#include "lbar/rng.hpp"

namespace lbar {

struct AudioAugConfig {
  int g_max = 0;       // dB, {0..6}
  int n_f = 0;         // frequency stripes, {0, 1}
  int w_f = 1;         // max frequency stripe width, {1..32}
  int n_t = 0;         // time stripes, {0..8}
  int w_t = 1;         // max time stripe width, {1..64}
  double p_ms = 0.0;   // Freq-MixStyle probability
  double alpha = 1.0;  // Beta(alpha, alpha) shape, (0, 1]

  void validate() const {
    if (g_max < 0 || g_max > 6) throw ConfigError("g_max", "must be in {0..6}");
    if (n_f < 0 || n_f > 1) throw ConfigError("n_f", "must be in {0, 1}");
    if (w_f < 1 || w_f > 32) throw ConfigError("w_f", "must be in {1..32}");
    if (n_t < 0 || n_t > 8) throw ConfigError("n_t", "must be in {0..8}");
    if (w_t < 1 || w_t > 64) throw ConfigError("w_t", "must be in {1..64}");
    if (!(p_ms >= 0.0 && p_ms <= 1.0)) throw ConfigError("p_MS", "must be in [0, 1]");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must be in (0, 1]");
  }

  bool is_identity() const { return g_max == 0 && n_f == 0 && n_t == 0 && p_ms == 0.0; }
};

// ---------------------------------------------------------------------------
// Gain

inline double sample_gain(Rng& rng, int g_max) {
  if (g_max < 0) throw std::invalid_argument("g_max must be non-negative");
  if (g_max == 0) return 0.0;
  return rng.uniform(-double(g_max), double(g_max));
}

inline double gain_factor(double g_db) { return std::pow(10.0, g_db / 20.0); }

// Scales every sample by 10^(g/20). No clipping.
inline Waveform apply_gain(Waveform w, double g_db) {
  if (g_db == 0.0) return w;
  const double factor = gain_factor(g_db);
  for (auto& s : w.samples) s *= factor;
  return w;
}

// ---------------------------------------------------------------------------
// SpecAugment

struct Stripe {
  int offset = 0;
  int width = 0;
};

// Width ~ U{1..max_width} clamped to `dim`, offset ~ U{0..dim - width}.
inline Stripe draw_stripe(Rng& rng, int max_width, int dim) {
  const int width = std::min(int(rng.uniform_int(1, std::max(1, max_width))), dim);
  const int offset = int(rng.uniform_int(0, dim - width));
  return {offset, width};
}

// Zeroes n_f frequency stripes and n_t time stripes inside the valid frames.
// Stripes are independent and may overlap.
inline MelSpectrogram spec_augment(MelSpectrogram m, int n_f, int w_f, int n_t, int w_t, Rng& rng) {
  if (m.values.size() == 0) throw std::invalid_argument("spec_augment on an empty spectrogram");
  const int n_mels = m.n_mels();
  const int valid = m.n_frames_valid;
  for (int s = 0; s < n_f; ++s) {
    const Stripe st = draw_stripe(rng, w_f, n_mels);
    if (valid > 0) m.values.block(st.offset, 0, st.width, valid).setZero();
  }
  if (valid == 0) return m;
  for (int s = 0; s < n_t; ++s) {
    const Stripe st = draw_stripe(rng, w_t, valid);
    m.values.middleCols(st.offset, st.width).setZero();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Freq-MixStyle

inline constexpr double kMixStyleEpsilon = 1e-5;

struct BinStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_dev;  // population
};

inline BinStats bin_stats(const MelSpectrogram& m) {
  if (m.n_frames_valid <= 0) throw std::invalid_argument("spectrogram has no valid frames");
  BinStats s;
  const auto v = m.valid();
  s.mean = v.rowwise().mean();
  s.std_dev = ((v.colwise() - s.mean).array().square().rowwise().sum() / double(m.n_frames_valid)).sqrt().matrix();
  return s;
}

// Folded Beta draw: the original statistics always keep weight >= 0.5.
inline double draw_mix_weight(Rng& rng, double alpha) {
  const double lambda = rng.beta(alpha, alpha);
  return std::max(lambda, 1.0 - lambda);
}

// Re-styles the valid frames of `m` (statistics `own`) toward `other` with weight lambda on `own`.
inline void mix_statistics(MelSpectrogram& m, const BinStats& own, const BinStats& other, double lambda) {
  const Eigen::VectorXd mu = lambda * own.mean + (1.0 - lambda) * other.mean;
  const Eigen::ArrayXd sigma = lambda * own.std_dev.array() + (1.0 - lambda) * other.std_dev.array();
  // (sigma_new + eps) / (sigma_own + eps)
  const Eigen::ArrayXd scale = (sigma + kMixStyleEpsilon) / (own.std_dev.array() + kMixStyleEpsilon);
  auto v = m.valid();
  v = (((v.colwise() - own.mean).array().colwise() * scale).matrix().colwise() + mu);
}

// For each example, with probability p_ms, mixes its per-bin statistics with
// those of a partner taken from one random permutation of the batch. All
// statistics come from the unmodified batch.
inline void freq_mixstyle(std::span<MelSpectrogram> batch, double alpha, double p_ms, Rng& rng) {
  if (p_ms <= 0.0 || batch.size() < 2) return;
  if (!(alpha > 0.0)) throw std::invalid_argument("freq_mixstyle alpha must be positive");
  std::vector<std::size_t> partner(batch.size());
  std::iota(partner.begin(), partner.end(), std::size_t{0});
  rng.shuffle(partner.begin(), partner.end());

  std::vector<BinStats> stats;
  stats.reserve(batch.size());
  for (const auto& m : batch) stats.push_back(bin_stats(m));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!rng.bernoulli(p_ms)) continue;
    const double lambda = draw_mix_weight(rng, alpha);
    const std::size_t j = partner[i];
    if (j == i) continue;
    mix_statistics(batch[i], stats[i], stats[j], lambda);
  }
}

}  // namespace lbar
