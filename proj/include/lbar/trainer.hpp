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

// Optimization loop: Adam with step-decayed learning rate, seeded batch
// assembly with on-the-fly augmentation, per-epoch validation and early
// stopping on validation mAP@10.

#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lbar/audio_aug.hpp"
#include "lbar/checkpoint.hpp"
#include "lbar/data/dataset.hpp"
#include "lbar/data/features.hpp"
#include "lbar/data/normalize.hpp"
#include "lbar/data/text.hpp"
#include "lbar/eval.hpp"
#include "lbar/model.hpp"
#include "lbar/text_aug.hpp"

namespace lbar {

struct OptimConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 30;
  int epochs = 50;
  double lr_drop_factor = 3.0;
  int lr_drop_every = 10;
  int patience = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("lr0", "must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("betas", "beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas", "beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("eps", "must be positive");
    if (batch_size < 2) throw ConfigError("batch_size", "must be at least 2");
    if (epochs < 1) throw ConfigError("epochs", "must be at least 1");
    if (!(lr_drop_factor >= 1.0)) throw ConfigError("lr_drop_factor", "must be at least 1");
    if (lr_drop_every < 1) throw ConfigError("lr_drop_every", "must be at least 1");
    if (patience < 1) throw ConfigError("patience", "must be at least 1");
  }
};

// lr0 / factor^floor(epoch / every)
inline double lr_at(int epoch, const OptimConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
  return cfg.lr0 / std::pow(cfg.lr_drop_factor, double(epoch / cfg.lr_drop_every));
}

struct AdamState {
  long long step = 0;
  ParamArrays m;
  ParamArrays v;

  static AdamState zeros_like(const ModelParams& p) {
    AdamState s;
    s.m = GradientSet::zeros_like(p);
    s.v = GradientSet::zeros_like(p);
    return s;
  }
};

inline void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state, double lr,
                      const OptimConfig& cfg) {
  for_each_array_pair(params, grads, [](const char* name, const Eigen::MatrixXd& p, const Eigen::MatrixXd& g) {
    if (p.rows() != g.rows() || p.cols() != g.cols())
      throw std::invalid_argument(std::string("gradient shape mismatch for ") + name);
    if (!g.allFinite()) throw std::domain_error(std::string("non-finite gradient for ") + name);
  });
  if (state.m.w1.size() == 0) state = AdamState::zeros_like(params);
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  // Visit (param, grad, m, v) quadruples in the shared array order.
  Eigen::MatrixXd* ps[] = {&params.w1, &params.b1, &params.w2, &params.b2, &params.embedding,
                           &params.w3, &params.b3, &params.w4, &params.b4};
  const Eigen::MatrixXd* gs[] = {&grads.w1, &grads.b1, &grads.w2, &grads.b2, &grads.embedding,
                                 &grads.w3, &grads.b3, &grads.w4, &grads.b4};
  Eigen::MatrixXd* ms[] = {&state.m.w1, &state.m.b1, &state.m.w2, &state.m.b2, &state.m.embedding,
                           &state.m.w3, &state.m.b3, &state.m.w4, &state.m.b4};
  Eigen::MatrixXd* vs[] = {&state.v.w1, &state.v.b1, &state.v.w2, &state.v.b2, &state.v.embedding,
                           &state.v.w3, &state.v.b3, &state.v.w4, &state.v.b4};
  for (int k = 0; k < 9; ++k) {
    auto& m = *ms[k];
    auto& v = *vs[k];
    const auto& g = *gs[k];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    ps[k]->array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  }
}

// Tracks the best validation score; improvement must be strict.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  }

  // Records the score for `epoch`; returns true when training should stop.
  bool update(int epoch, double score) {
    if (best_epoch_ < 0 || score > best_) {
      best_ = score;
      best_epoch_ = epoch;
      return false;
    }
    return epoch - best_epoch_ >= patience_;
  }

  bool improved_at(int epoch) const { return best_epoch_ == epoch; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int best_epoch_ = -1;
};

struct RunResult {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_map;     // per epoch, mAP@10
  std::vector<double> lr;          // per epoch
  double best_val_map = 0.0;
  int best_epoch = -1;
  bool stopped_early = false;
  std::string checkpoint_path;
  std::string error;  // non-empty when the run aborted

  int epochs_run() const { return int(val_map.size()); }
};

// Everything a training run needs besides data.
struct TrainSetup {
  FeatureConfig features;
  ModelDims dims;  // vocab_size is replaced by the training vocabulary size
  double tau = 1.0;
  AudioAugConfig audio_aug;
  TextAugConfig text_aug;
  OptimConfig optim;
  bool augment = true;  // false bypasses every augmentation call
  int threads = 1;
  std::string config_hash;
};

struct TextResources {
  SynonymLexicon lexicon;
  BackTranslator translator;
};

struct TrainHooks {
  // Replaces the built-in validation (mAP@10 on the validation split).
  std::function<double(int epoch, const Checkpoint&)> validate;
  std::function<void(int epoch, double train_loss, double val_map)> on_epoch;
  std::optional<std::filesystem::path> checkpoint_path;
};

// Thrown when a run fails part-way; carries the metrics recorded so far.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(RunResult partial, const std::string& what)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunResult& partial() const { return partial_; }

 private:
  RunResult partial_;
};

// Resampled waveforms and their un-augmented log-mel features.
struct FeatureBank {
  std::vector<Waveform> waves;
  std::vector<MelSpectrogram> mels;
};

inline FeatureBank extract_features(const PairedDataset& ds, const LogMelExtractor& extractor, int threads = 1) {
  FeatureBank bank;
  const std::size_t n = ds.items.size();
  bank.waves.resize(n);
  bank.mels.resize(n);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < n; i += step) {
      bank.waves[i] = resample_linear(ds.items[i].audio, extractor.config().target_sr);
      bank.mels[i] = extractor(bank.waves[i]);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::size_t(std::max(threads, 1)), n));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  return bank;
}

// Every caption of every item is a query against all recordings of the split.
inline RetrievalMetrics evaluate_retrieval(const Checkpoint& model, const PairedDataset& ds, const FeatureBank& bank) {
  if (ds.empty()) throw std::invalid_argument("cannot evaluate an empty split");
  std::vector<MelSpectrogram> mels = bank.mels;
  pad_to_longest(mels);
  NormStats stats = model.norm;
  freq_normalize(mels, stats, /*update=*/false);
  const Eigen::MatrixXd audio = embed_audio(mels, model.params);

  std::vector<TokenSequence> queries;
  std::vector<int> targets;
  for (std::size_t i = 0; i < ds.items.size(); ++i)
    for (const auto& c : ds.items[i].captions) {
      queries.push_back(tokenize(preprocess_caption(c), model.vocab));
      targets.push_back(int(i));
    }
  const Eigen::MatrixXd text = embed_text(queries, model.params);
  const auto ranks = rank_targets(similarity_matrix(text, audio).values, targets);
  return retrieval_metrics(ranks);
}

struct TrainOutput {
  RunResult result;
  Checkpoint best;  // parameters at the best validation epoch
};

namespace detail {
enum StreamTag : std::uint64_t { kShuffleStream = 1, kExampleStream, kMixStream, kMaskStream, kInitStream };
}

inline TrainOutput train_run(const PairedDataset& train, const PairedDataset& val, const TrainSetup& setup,
                             const TextResources& text, const TrainHooks& hooks = {}) {
  setup.features.validate();
  setup.audio_aug.validate();
  setup.text_aug.validate();
  setup.optim.validate();
  if (!(setup.tau > 0.0)) throw ConfigError("model.tau", "must be positive");
  if (setup.dims.n_mels != setup.features.n_mels) throw ConfigError("model.n_mels", "must equal features.n_mels");
  if (train.size() < 2) throw std::invalid_argument("training split needs at least 2 items");
  if (val.empty() && !hooks.validate) throw std::invalid_argument("validation split is empty");
  train.validate();

  const OptimConfig& opt = setup.optim;
  const LogMelExtractor extractor(setup.features);
  const FeatureBank train_bank = extract_features(train, extractor, setup.threads);
  const FeatureBank val_bank = hooks.validate ? FeatureBank{} : extract_features(val, extractor, setup.threads);

  std::vector<std::string> train_captions;
  for (const auto& it : train.items)
    for (const auto& c : it.captions) train_captions.push_back(preprocess_caption(c));

  Checkpoint model;
  model.vocab = build_vocab(train_captions);
  ModelDims dims = setup.dims;
  dims.vocab_size = model.vocab.size();
  model.params = init_params(dims, Rng::stream(opt.seed, {detail::kInitStream})());
  model.norm = NormStats::identity(dims.n_mels);
  model.tau = setup.tau;
  model.config_hash = setup.config_hash;
  const auto corpus_words = model.vocab.words();

  AdamState adam = AdamState::zeros_like(model.params);
  EarlyStopping stopper(opt.patience);
  TrainOutput out;
  RunResult& res = out.result;
  if (hooks.checkpoint_path) res.checkpoint_path = hooks.checkpoint_path->string();

  const AudioAugConfig& aa = setup.audio_aug;
  const TextAugConfig& ta = setup.text_aug;
  const std::size_t n = train.size();
  const auto bs = std::size_t(opt.batch_size);

  try {
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
      const double lr = lr_at(epoch, opt);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng::stream(opt.seed, {detail::kShuffleStream, std::uint64_t(epoch)}).shuffle(order.begin(), order.end());

      double loss_sum = 0.0;
      int n_batches = 0;
      for (std::size_t start = 0, b = 0; start < n; start += bs, ++b) {
        const std::size_t size = std::min(bs, n - start);
        if (size < 2) continue;
        std::vector<MelSpectrogram> mels;
        std::vector<TokenSequence> tokens;
        mels.reserve(size);
        tokens.reserve(size);
        for (std::size_t s = 0; s < size; ++s) {
          const std::size_t idx = order[start + s];
          const auto& item = train.items[idx];
          Rng ex = Rng::stream(opt.seed, {detail::kExampleStream, std::uint64_t(epoch), b, s});
          const std::string& caption = item.captions[ex.index(item.captions.size())];
          const std::string text_in = setup.augment ? augment_caption(caption, ta, text.translator, text.lexicon,
                                                                      corpus_words, ex)
                                                    : preprocess_caption(caption);
          tokens.push_back(tokenize(text_in, model.vocab));
          const double g = setup.augment ? sample_gain(ex, aa.g_max) : 0.0;
          mels.push_back(g == 0.0 ? train_bank.mels[idx] : extractor(apply_gain(train_bank.waves[idx], g)));
        }
        pad_to_longest(mels);
        pad_to_longest(std::span<TokenSequence>(tokens));
        freq_normalize(mels, model.norm, /*update=*/true);
        if (setup.augment) {
          Rng mix = Rng::stream(opt.seed, {detail::kMixStream, std::uint64_t(epoch), b});
          freq_mixstyle(mels, aa.alpha, aa.p_ms, mix);
          if (aa.n_f > 0 || aa.n_t > 0)
            for (std::size_t s = 0; s < size; ++s) {
              Rng mask = Rng::stream(opt.seed, {detail::kMaskStream, std::uint64_t(epoch), b, s});
              mels[s] = spec_augment(std::move(mels[s]), aa.n_f, aa.w_f, aa.n_t, aa.w_t, mask);
            }
        }
        const auto bw = backward(mels, tokens, model.params, setup.tau);
        adam_step(model.params, bw.grads, adam, lr, opt);
        loss_sum += bw.loss;
        ++n_batches;
      }

      const double train_loss = n_batches > 0 ? loss_sum / n_batches : std::numeric_limits<double>::quiet_NaN();
      const double val_map = hooks.validate ? hooks.validate(epoch, model)
                                            : evaluate_retrieval(model, val, val_bank).map10;
      res.train_loss.push_back(train_loss);
      res.val_map.push_back(val_map);
      res.lr.push_back(lr);
      const bool stop = stopper.update(epoch, val_map);
      if (stopper.improved_at(epoch)) {
        out.best = model;
        if (hooks.checkpoint_path) save_checkpoint(*hooks.checkpoint_path, model);
      }
      res.best_val_map = stopper.best();
      res.best_epoch = stopper.best_epoch();
      if (hooks.on_epoch) hooks.on_epoch(epoch, train_loss, val_map);
      if (stop) {
        res.stopped_early = true;
        break;
      }
    }
  } catch (const std::exception& e) {
    res.error = e.what();
    throw TrainingAborted(res, e.what());
  }
  return out;
}

inline nlohmann::json to_json(const RunResult& r) {
  auto nan_safe = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return a;
  };
  nlohmann::json j = {{"train_loss", nan_safe(r.train_loss)},
                      {"val_map10", nan_safe(r.val_map)},
                      {"lr", r.lr},
                      {"best_val_map10", r.best_val_map},
                      {"best_epoch", r.best_epoch},
                      {"epochs_run", r.epochs_run()},
                      {"stopped_early", r.stopped_early},
                      {"checkpoint", r.checkpoint_path}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

// epoch,lr,train_loss,val_map10 with round-trip precision.
inline std::string metrics_csv(const RunResult& r, const std::string& config_hash) {
  std::string out = "# config_hash=" + config_hash + "\nepoch,lr,train_loss,val_map10\n";
  char buf[128];
  for (std::size_t e = 0; e < r.val_map.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e, r.lr[e], r.train_loss[e], r.val_map[e]);
    out += buf;
  }
  return out;
}

}  // namespace lbar
