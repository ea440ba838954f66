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

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <stdexcept>

#include "lbar/data/features.hpp"

namespace lbar {

// Per-mel-bin running statistics. Not learnable; treated as constants by the
// model's backward pass.
struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  long long count = 0;  // valid frames seen by updates

  static NormStats identity(int n_mels) {
    return {Eigen::VectorXd::Zero(n_mels), Eigen::VectorXd::Ones(n_mels), 0};
  }
};

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kNormMomentum = 0.1;

// Per-bin mean and population variance over the valid frames of a batch.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> batch_bin_moments(std::span<const MelSpectrogram> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const Eigen::Index n_mels = batch.front().values.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_mels);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(n_mels);
  long long frames = 0;
  for (const auto& m : batch) {
    if (m.values.rows() != n_mels) throw std::invalid_argument("mixed mel bin counts in batch");
    sum += m.valid().rowwise().sum();
    frames += m.n_frames_valid;
  }
  if (frames == 0) throw std::invalid_argument("batch has no valid frames");
  Eigen::VectorXd mean = sum / double(frames);
  for (const auto& m : batch) sq += (m.valid().colwise() - mean).array().square().matrix().rowwise().sum();
  return {std::move(mean), sq / double(frames)};
}

// x <- (x - mean) / sqrt(var + eps) on valid frames; padding stays zero.
inline void standardize(std::span<MelSpectrogram> batch, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
  const Eigen::ArrayXd inv_std = (var.array() + kNormEpsilon).rsqrt();
  for (auto& m : batch) {
    if (m.values.rows() != mean.size()) throw std::invalid_argument("normalization stats do not match n_mels");
    m.valid() = ((m.valid().colwise() - mean).array().colwise() * inv_std).matrix();
  }
}

inline void unstandardize(std::span<MelSpectrogram> batch, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
  const Eigen::ArrayXd std_dev = (var.array() + kNormEpsilon).sqrt();
  for (auto& m : batch) {
    if (m.values.rows() != mean.size()) throw std::invalid_argument("normalization stats do not match n_mels");
    m.valid() = ((m.valid().array().colwise() * std_dev).matrix().colwise() + mean);
  }
}

// Frequency-axis normalization. With `update`, the batch is standardized by
// its own statistics and the running statistics move toward them with
// momentum 0.1; otherwise the running statistics are applied as-is.
inline void freq_normalize(std::span<MelSpectrogram> batch, NormStats& stats, bool update) {
  if (batch.empty()) return;
  if (stats.mean.size() != batch.front().values.rows() || stats.var.size() != stats.mean.size())
    throw std::invalid_argument("normalization stats do not match n_mels");
  if (!update) {
    standardize(batch, stats.mean, stats.var);
    return;
  }
  auto [mean, var] = batch_bin_moments(std::span<const MelSpectrogram>(batch.data(), batch.size()));
  standardize(batch, mean, var);
  stats.mean = (1.0 - kNormMomentum) * stats.mean + kNormMomentum * mean;
  stats.var = (1.0 - kNormMomentum) * stats.var + kNormMomentum * var;
  for (const auto& m : batch) stats.count += m.n_frames_valid;
}

// Inverse of freq_normalize(batch, stats, /*update=*/false).
inline void freq_denormalize(std::span<MelSpectrogram> batch, const NormStats& stats) {
  unstandardize(batch, stats.mean, stats.var);
}

}  // namespace lbar
