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

// Log-mel spectrogram features: Hann-windowed power STFT with reflect-padded
// centered frames, Slaney-scale area-normalized triangular filterbank, natural
// log with an additive floor.

#pragma once

#include <fftw3.h>

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "lbar/data/waveform.hpp"
#include "lbar/error.hpp"

namespace lbar {

struct FeatureConfig {
  int n_fft = 1024;
  int hop = 320;
  int n_mels = 64;
  int target_sr = 32000;
  double f_min = 0.0;
  std::optional<double> f_max;  // defaults to target_sr / 2
  double log_floor = 1e-10;

  double effective_f_max() const { return f_max.value_or(target_sr / 2.0); }

  void validate() const {
    if (n_fft < 2) throw ConfigError("n_fft", "must be at least 2");
    if (hop < 1) throw ConfigError("hop", "must be positive");
    if (hop > n_fft) throw ConfigError("hop", "must not exceed n_fft");
    if (n_mels < 1) throw ConfigError("n_mels", "must be at least 1");
    if (target_sr <= 0) throw ConfigError("target_sr", "must be positive");
    if (f_min < 0.0) throw ConfigError("f_min", "must be non-negative");
    if (!(f_min < effective_f_max())) throw ConfigError("f_max", "must exceed f_min");
    if (effective_f_max() > target_sr / 2.0) throw ConfigError("f_max", "must not exceed target_sr / 2");
    if (!(log_floor > 0.0)) throw ConfigError("log_floor", "must be positive");
  }
};

// [n_mels x T] natural-log mel power. Columns at or beyond n_frames_valid are
// batch zero-padding.
struct MelSpectrogram {
  Eigen::MatrixXd values;
  int n_frames_valid = 0;

  int n_mels() const { return int(values.rows()); }
  int n_frames() const { return int(values.cols()); }
  auto valid() const { return values.leftCols(n_frames_valid); }
  auto valid() { return values.leftCols(n_frames_valid); }
};

// Frames produced for a signal of `n_samples`: 1 + floor(n / hop).
constexpr int frame_count(std::size_t n_samples, int hop) { return 1 + int(n_samples / std::size_t(hop)); }

inline double hz_to_mel_slaney(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz < min_log_hz ? hz / f_sp : min_log_mel + std::log(hz / min_log_hz) / logstep;
}

inline double mel_to_hz_slaney(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel < min_log_mel ? mel * f_sp : min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

// [n_mels x (n_fft/2 + 1)] filter weights. Each triangle has height
// 2 / (f_right - f_left), i.e. unit area in Hz.
inline Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg) {
  const int n_bins = cfg.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel_slaney(cfg.f_min);
  const double mel_hi = hz_to_mel_slaney(cfg.effective_f_max());
  std::vector<double> edges(std::size_t(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz_slaney(mel_lo + (mel_hi - mel_lo) * double(i) / double(cfg.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    const double norm = 2.0 / (right - left);
    for (int k = 0; k < n_bins; ++k) {
      const double f = double(k) * cfg.target_sr / cfg.n_fft;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rise, fall));
      fb(m, k) = w * norm;
    }
  }
  return fb;
}

namespace detail {

// The FFTW planner is not thread-safe; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * std::size_t(n)));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * std::size_t(n / 2 + 1)));
    if (in_ == nullptr || out_ == nullptr) {
      release();
      throw std::bad_alloc();
    }
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() { release(); }

  std::span<double> input() { return {in_, std::size_t(n_)}; }

  // |X_k|^2 for k = 0..n/2 of the current input buffer.
  void power(std::span<double> out) {
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) out[std::size_t(k)] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  void release() {
    if (plan_ != nullptr) {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }

  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

// Reflection about the end samples (numpy "reflect"), repeated as needed.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = std::ptrdiff_t(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  return std::size_t(i < std::ptrdiff_t(n) ? i : period - i);
}

}  // namespace detail

// Precomputed window and filterbank for repeated extraction with one config.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(FeatureConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    fb_ = mel_filterbank(cfg_);
    window_.resize(std::size_t(cfg_.n_fft));
    for (int k = 0; k < cfg_.n_fft; ++k)
      window_[std::size_t(k)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / cfg_.n_fft);
  }

  const FeatureConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& filterbank() const { return fb_; }

  MelSpectrogram operator()(const Waveform& w) const {
    validate(w);
    if (w.sample_rate != cfg_.target_sr)
      throw std::invalid_argument("waveform sample rate " + std::to_string(w.sample_rate) +
                                  " does not match target_sr " + std::to_string(cfg_.target_sr) +
                                  "; resample first");
    if (w.samples.size() < std::size_t(cfg_.hop))
      throw std::invalid_argument("waveform shorter than one hop (" + std::to_string(w.samples.size()) +
                                  " < " + std::to_string(cfg_.hop) + " samples)");
    const int n_frames = frame_count(w.samples.size(), cfg_.hop);
    const int n_bins = cfg_.n_fft / 2 + 1;
    const std::ptrdiff_t pad = cfg_.n_fft / 2;

    Eigen::MatrixXd power(n_bins, n_frames);
    detail::RealFft fft(cfg_.n_fft);
    auto in = fft.input();
    std::vector<double> col(static_cast<std::size_t>(n_bins));
    const std::size_t n = w.samples.size();
    for (int t = 0; t < n_frames; ++t) {
      const std::ptrdiff_t start = std::ptrdiff_t(t) * cfg_.hop - pad;
      for (int k = 0; k < cfg_.n_fft; ++k) {
        const std::ptrdiff_t i = start + k;
        const double s = (i >= 0 && std::size_t(i) < n) ? w.samples[std::size_t(i)]
                                                        : w.samples[detail::reflect_index(i, n)];
        in[std::size_t(k)] = s * window_[std::size_t(k)];
      }
      fft.power(col);
      power.col(t) = Eigen::Map<const Eigen::VectorXd>(col.data(), n_bins);
    }
    MelSpectrogram m;
    m.values = ((fb_ * power).array() + cfg_.log_floor).log().matrix();
    m.n_frames_valid = n_frames;
    return m;
  }

 private:
  FeatureConfig cfg_;
  Eigen::MatrixXd fb_;
  std::vector<double> window_;
};

inline MelSpectrogram logmel(const Waveform& w, const FeatureConfig& cfg) { return LogMelExtractor(cfg)(w); }

// Zero-pads every spectrogram to the longest in the batch. n_frames_valid is kept.
inline void pad_to_longest(std::span<MelSpectrogram> batch) {
  Eigen::Index longest = 0;
  for (const auto& m : batch) longest = std::max(longest, m.values.cols());
  for (auto& m : batch) {
    if (m.values.cols() == longest) continue;
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(m.values.rows(), longest);
    padded.leftCols(m.values.cols()) = m.values;
    m.values = std::move(padded);
  }
}

}  // namespace lbar
