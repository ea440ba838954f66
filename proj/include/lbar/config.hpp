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

// Run configuration file: one JSON document with the sections data, features,
// audio_aug, text_aug, model, optim, smbo, paths and seed. Unknown keys are
// rejected and every error names its dotted key path.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "lbar/audio_aug.hpp"
#include "lbar/data/features.hpp"
#include "lbar/error.hpp"
#include "lbar/model.hpp"
#include "lbar/smbo.hpp"
#include "lbar/text_aug.hpp"
#include "lbar/trainer.hpp"

#ifndef LBAR_DATA_DIR
#define LBAR_DATA_DIR "data"
#endif

namespace lbar {

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "manifest"
  int n_classes = 8;
  int n_train = 200;
  int n_val = 100;
  int n_test = 100;
  std::string train;  // manifest paths (CSV or JSONL)
  std::string val;
  std::string test;
  std::string audio_root;
};

struct TextResourceConfig {
  std::string lexicon = std::string(LBAR_DATA_DIR) + "/synonyms.json";
  std::string bt_cache;             // optional translation cache file
  std::string bt_provider = "none";  // "none", "mock" or "http"
};

struct SmboConfig {
  int n_init = 10;
  int n_trials = 100;
  double gamma = 0.25;
  int n_candidates = 24;
  double prior_weight = 1.0;
  std::string bandwidth = "adaptive";  // "adaptive" or "range"
  std::string space;  // search space file; empty selects the built-in space
  std::string log = "trials.jsonl";
};

struct RunConfig {
  DataConfig data;
  FeatureConfig features;
  AudioAugConfig audio_aug;
  TextAugConfig text_aug;
  TextResourceConfig text_resources;
  ModelDims model;
  double tau = 1.0;
  OptimConfig optim;
  SmboConfig smbo;
  std::string out_dir = "runs/default";
  std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  return json{
      {"data",
       {{"source", c.data.source},
        {"n_classes", c.data.n_classes},
        {"n_train", c.data.n_train},
        {"n_val", c.data.n_val},
        {"n_test", c.data.n_test},
        {"train", c.data.train},
        {"val", c.data.val},
        {"test", c.data.test},
        {"audio_root", c.data.audio_root}}},
      {"features",
       {{"n_fft", c.features.n_fft},
        {"hop", c.features.hop},
        {"n_mels", c.features.n_mels},
        {"target_sr", c.features.target_sr},
        {"f_min", c.features.f_min},
        {"f_max", c.features.f_max ? json(*c.features.f_max) : json(nullptr)},
        {"log_floor", c.features.log_floor}}},
      {"audio_aug",
       {{"g_max", c.audio_aug.g_max},
        {"n_f", c.audio_aug.n_f},
        {"w_f", c.audio_aug.w_f},
        {"n_t", c.audio_aug.n_t},
        {"w_t", c.audio_aug.w_t},
        {"p_MS", c.audio_aug.p_ms},
        {"alpha", c.audio_aug.alpha}}},
      {"text_aug",
       {{"p_EDA", c.text_aug.p_eda},
        {"p_syn", c.text_aug.p_syn},
        {"p_swp", c.text_aug.p_swp},
        {"p_ins", c.text_aug.p_ins},
        {"p_del", c.text_aug.p_del},
        {"p_bt", c.text_aug.p_bt},
        {"lexicon", c.text_resources.lexicon},
        {"bt_cache", c.text_resources.bt_cache},
        {"bt_provider", c.text_resources.bt_provider}}},
      {"model",
       {{"n_mels", c.model.n_mels},
        {"embed_dim", c.model.embed_dim},
        {"audio_hidden", c.model.audio_hidden},
        {"text_hidden", c.model.text_hidden},
        {"token_embed_dim", c.model.token_embed_dim},
        {"tau", c.tau}}},
      {"optim",
       {{"lr0", c.optim.lr0},
        {"betas", {c.optim.beta1, c.optim.beta2}},
        {"eps", c.optim.eps},
        {"batch_size", c.optim.batch_size},
        {"epochs", c.optim.epochs},
        {"lr_drop_factor", c.optim.lr_drop_factor},
        {"lr_drop_every", c.optim.lr_drop_every},
        {"patience", c.optim.patience}}},
      {"smbo",
       {{"n_init", c.smbo.n_init},
        {"n_trials", c.smbo.n_trials},
        {"gamma", c.smbo.gamma},
        {"n_candidates", c.smbo.n_candidates},
        {"prior_weight", c.smbo.prior_weight},
        {"bandwidth", c.smbo.bandwidth},
        {"space", c.smbo.space},
        {"log", c.smbo.log}}},
      {"paths", {{"out_dir", c.out_dir}}},
      {"seed", c.seed}};
}

namespace detail {

// Rejects keys of `user` absent from `schema`, recursing into objects.
inline void check_keys(const nlohmann::json& user, const nlohmann::json& schema, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError(prefix, "expected a JSON object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError(path, "unknown key");
    if (schema.at(key).is_object()) check_keys(value, schema.at(key), path);
  }
}

class Reader {
 public:
  explicit Reader(const nlohmann::json& root) : root_(root) {}

  template <class T>
  void get(const std::string& path, T& out) const {
    const nlohmann::json* node = lookup(path);
    if (!node) return;
    try {
      if constexpr (std::is_integral_v<T>) {
        if (!node->is_number_integer()) throw ConfigError(path, "expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!node->is_number()) throw ConfigError(path, "expected a number");
      }
      out = node->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path, "wrong type: " + std::string(node->type_name()));
    }
  }

  const nlohmann::json* lookup(const std::string& path) const {
    const nlohmann::json* node = &root_;
    std::size_t start = 0;
    while (start <= path.size()) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(key)) return nullptr;
      node = &node->at(key);
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return node;
  }

 private:
  const nlohmann::json& root_;
};

template <class F>
void with_prefix(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(section + "." + e.key(), e.detail());
  }
}

}  // namespace detail

// Validates every section; errors carry the dotted key path.
inline void validate(const RunConfig& c) {
  const auto& d = c.data;
  if (d.source == "synthetic") {
    if (d.n_classes < 2) throw ConfigError("data.n_classes", "must be at least 2");
    if (d.n_train < 2) throw ConfigError("data.n_train", "must be at least 2");
    if (d.n_val < 1) throw ConfigError("data.n_val", "must be at least 1");
    if (d.n_test < 1) throw ConfigError("data.n_test", "must be at least 1");
  } else if (d.source == "manifest") {
    for (const auto& [key, path] : {std::pair{"data.train", &d.train}, {"data.val", &d.val}, {"data.test", &d.test}}) {
      if (path->empty()) throw ConfigError(key, "manifest path is required");
      if (!std::filesystem::exists(*path)) throw ConfigError(key, "file not found: " + *path);
    }
  } else {
    throw ConfigError("data.source", "must be \"synthetic\" or \"manifest\"");
  }
  detail::with_prefix("features", [&] { c.features.validate(); });
  detail::with_prefix("audio_aug", [&] { c.audio_aug.validate(); });
  detail::with_prefix("text_aug", [&] { c.text_aug.validate(); });
  const auto& tr = c.text_resources;
  if (tr.bt_provider != "none" && tr.bt_provider != "mock" && tr.bt_provider != "http")
    throw ConfigError("text_aug.bt_provider", "must be \"none\", \"mock\" or \"http\"");
  if (c.text_aug.p_eda > 0.0 && c.text_aug.p_syn > 0.0 && !std::filesystem::exists(tr.lexicon))
    throw ConfigError("text_aug.lexicon", "file not found: " + tr.lexicon);
  if (c.text_aug.p_bt > 0.0 && tr.bt_provider == "none" && tr.bt_cache.empty())
    throw ConfigError("text_aug.bt_provider", "p_bt > 0 needs a translation cache or provider");
  detail::with_prefix("model", [&] {
    ModelDims dims = c.model;
    dims.vocab_size = std::max(dims.vocab_size, 2);
    dims.validate();
  });
  if (c.model.n_mels != c.features.n_mels) throw ConfigError("model.n_mels", "must equal features.n_mels");
  if (!(c.tau > 0.0)) throw ConfigError("model.tau", "must be positive");
  detail::with_prefix("optim", [&] { c.optim.validate(); });
  if (c.smbo.n_trials < 1) throw ConfigError("smbo.n_trials", "must be at least 1");
  if (c.smbo.n_init < 0 || c.smbo.n_init > c.smbo.n_trials)
    throw ConfigError("smbo.n_init", "must be in [0, n_trials]");
  if (!(c.smbo.gamma > 0.0 && c.smbo.gamma <= 1.0)) throw ConfigError("smbo.gamma", "must be in (0, 1]");
  if (c.smbo.n_candidates < 1) throw ConfigError("smbo.n_candidates", "must be at least 1");
  if (!(c.smbo.prior_weight >= 0.0)) throw ConfigError("smbo.prior_weight", "must be non-negative");
  if (c.smbo.bandwidth != "adaptive" && c.smbo.bandwidth != "range")
    throw ConfigError("smbo.bandwidth", "must be \"adaptive\" or \"range\"");
  if (c.out_dir.empty()) throw ConfigError("paths.out_dir", "must not be empty");
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::check_keys(j, to_json(c), "");
  const detail::Reader r(j);
  r.get("data.source", c.data.source);
  r.get("data.n_classes", c.data.n_classes);
  r.get("data.n_train", c.data.n_train);
  r.get("data.n_val", c.data.n_val);
  r.get("data.n_test", c.data.n_test);
  r.get("data.train", c.data.train);
  r.get("data.val", c.data.val);
  r.get("data.test", c.data.test);
  r.get("data.audio_root", c.data.audio_root);
  r.get("features.n_fft", c.features.n_fft);
  r.get("features.hop", c.features.hop);
  r.get("features.n_mels", c.features.n_mels);
  r.get("features.target_sr", c.features.target_sr);
  r.get("features.f_min", c.features.f_min);
  if (const auto* f = r.lookup("features.f_max"); f && !f->is_null()) {
    double v = 0.0;
    r.get("features.f_max", v);
    c.features.f_max = v;
  }
  r.get("features.log_floor", c.features.log_floor);
  r.get("audio_aug.g_max", c.audio_aug.g_max);
  r.get("audio_aug.n_f", c.audio_aug.n_f);
  r.get("audio_aug.w_f", c.audio_aug.w_f);
  r.get("audio_aug.n_t", c.audio_aug.n_t);
  r.get("audio_aug.w_t", c.audio_aug.w_t);
  r.get("audio_aug.p_MS", c.audio_aug.p_ms);
  r.get("audio_aug.alpha", c.audio_aug.alpha);
  r.get("text_aug.p_EDA", c.text_aug.p_eda);
  r.get("text_aug.p_syn", c.text_aug.p_syn);
  r.get("text_aug.p_swp", c.text_aug.p_swp);
  r.get("text_aug.p_ins", c.text_aug.p_ins);
  r.get("text_aug.p_del", c.text_aug.p_del);
  r.get("text_aug.p_bt", c.text_aug.p_bt);
  r.get("text_aug.lexicon", c.text_resources.lexicon);
  r.get("text_aug.bt_cache", c.text_resources.bt_cache);
  r.get("text_aug.bt_provider", c.text_resources.bt_provider);
  r.get("model.n_mels", c.model.n_mels);
  r.get("model.embed_dim", c.model.embed_dim);
  r.get("model.audio_hidden", c.model.audio_hidden);
  r.get("model.text_hidden", c.model.text_hidden);
  r.get("model.token_embed_dim", c.model.token_embed_dim);
  r.get("model.tau", c.tau);
  r.get("optim.lr0", c.optim.lr0);
  if (const auto* b = r.lookup("optim.betas")) {
    if (!b->is_array() || b->size() != 2 || !(*b)[0].is_number() || !(*b)[1].is_number())
      throw ConfigError("optim.betas", "expected [beta1, beta2]");
    c.optim.beta1 = (*b)[0].get<double>();
    c.optim.beta2 = (*b)[1].get<double>();
  }
  r.get("optim.eps", c.optim.eps);
  r.get("optim.batch_size", c.optim.batch_size);
  r.get("optim.epochs", c.optim.epochs);
  r.get("optim.lr_drop_factor", c.optim.lr_drop_factor);
  r.get("optim.lr_drop_every", c.optim.lr_drop_every);
  r.get("optim.patience", c.optim.patience);
  r.get("smbo.n_init", c.smbo.n_init);
  r.get("smbo.n_trials", c.smbo.n_trials);
  r.get("smbo.gamma", c.smbo.gamma);
  r.get("smbo.n_candidates", c.smbo.n_candidates);
  r.get("smbo.prior_weight", c.smbo.prior_weight);
  r.get("smbo.bandwidth", c.smbo.bandwidth);
  r.get("smbo.space", c.smbo.space);
  r.get("smbo.log", c.smbo.log);
  r.get("paths.out_dir", c.out_dir);
  r.get("seed", c.seed);
  c.optim.seed = c.seed;
  return c;
}

// Applies "a.b.c=value" overrides; the value is parsed as JSON when possible,
// otherwise taken as a string.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  const nlohmann::json schema = to_json(RunConfig{});
  const nlohmann::json* s = &schema;
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!s->is_object() || !s->contains(key)) throw ConfigError(path, "unknown key");
    s = &s->at(key);
    if (!node->is_object()) *node = nlohmann::json::object();
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

inline nlohmann::json read_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  nlohmann::json doc = read_config_json(path);
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig c = run_config_from_json(doc);
  validate(c);
  return c;
}

// FNV-1a over the canonical JSON of the fully resolved config, output
// paths excluded.
inline std::string config_hash(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("paths");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Smallest Beta shape used when a search assigns alpha = 0.
inline constexpr double kMinMixAlpha = 1e-3;

// Writes the searched values into a copy of `base`. Names outside the
// augmentation parameters are rejected.
inline RunConfig apply_assignment(RunConfig base, const SearchSpace& space, const Assignment& a) {
  const nlohmann::json values = to_json(space, a);
  for (const auto& [name, v] : values.items()) {
    auto& au = base.audio_aug;
    auto& tx = base.text_aug;
    if (name == "p_EDA") tx.p_eda = v.get<double>();
    else if (name == "p_syn") tx.p_syn = v.get<double>();
    else if (name == "p_swp") tx.p_swp = v.get<double>();
    else if (name == "p_ins") tx.p_ins = v.get<double>();
    else if (name == "p_del") tx.p_del = v.get<double>();
    else if (name == "p_bt") tx.p_bt = v.get<double>();
    else if (name == "n_f") au.n_f = v.get<int>();
    else if (name == "w_f") au.w_f = v.get<int>();
    else if (name == "n_t") au.n_t = v.get<int>();
    else if (name == "w_t") au.w_t = v.get<int>();
    else if (name == "g_max") au.g_max = v.get<int>();
    else if (name == "p_MS") au.p_ms = v.get<double>();
    else if (name == "alpha") au.alpha = std::max(v.get<double>(), kMinMixAlpha);
    else throw ConfigError(name, "not a searchable parameter");
  }
  return base;
}

inline TrainSetup train_setup(const RunConfig& c, int threads = 1) {
  TrainSetup s;
  s.features = c.features;
  s.dims = c.model;
  s.tau = c.tau;
  s.audio_aug = c.audio_aug;
  s.text_aug = c.text_aug;
  s.optim = c.optim;
  s.optim.seed = c.seed;
  s.threads = threads;
  s.config_hash = config_hash(c);
  return s;
}

// SMBO objective: one training run per assignment, scored by its best
// validation mAP@10. Runs stopped by patience are reported as pruned.
inline Objective training_objective(const RunConfig& base, const SearchSpace& space, const PairedDataset& train,
                                    const PairedDataset& val, const TextResources& text, int threads = 1,
                                    TrainHooks hooks = {}) {
  return [&base, &space, &train, &val, text, threads, hooks](const Assignment& a, int trial_id) {
    const RunConfig cfg = apply_assignment(base, space, a);
    validate(cfg);
    TrainOutput run;
    try {
      run = train_run(train, val, train_setup(cfg, threads), text, hooks);
    } catch (const TrainingAborted& e) {
      throw std::runtime_error("trial " + std::to_string(trial_id) + ": " + e.what());
    }
    const auto& r = run.result;
    return TrialOutcome{r.best_val_map, r.epochs_run(), r.stopped_early};
  };
}

}  // namespace lbar
