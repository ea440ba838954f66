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

// Command implementations behind the `lbar` executable. Each command returns
// a process exit code: 0 success, 2 usage or configuration error, 3 corrupt
// persisted artifact, 4 external service failure.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lbar/audio_aug.hpp"
#include "lbar/checkpoint.hpp"
#include "lbar/config.hpp"
#include "lbar/data/dataset.hpp"
#include "lbar/data/features.hpp"
#include "lbar/error.hpp"
#include "lbar/eval.hpp"
#include "lbar/smbo.hpp"
#include "lbar/text_aug.hpp"
#include "lbar/text_aug_http.hpp"
#include "lbar/trainer.hpp"

namespace lbar::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kCorrupt = 3, kService = 4 };

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

// Runs `body`, mapping exceptions onto exit codes.
template <class F>
int guarded(Streams io, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    io.err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const PersistenceError& e) {
    io.err << "corrupt or unreadable file: " << e.what() << "\n";
    return kCorrupt;
  } catch (const ServiceError& e) {
    io.err << "external service error: " << e.what() << "\n";
    return kService;
  } catch (const FormatError& e) {
    io.err << "input error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    io.err << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

// ---------------------------------------------------------------------------
// Shared plumbing

inline PairedDataset load_split(const RunConfig& c, Split split) {
  const auto& d = c.data;
  if (d.source == "synthetic") {
    const int n = split == Split::kTrain ? d.n_train : split == Split::kVal ? d.n_val : d.n_test;
    return synth_dataset(d.n_classes, n, c.seed, split);
  }
  const std::string& path = split == Split::kTrain ? d.train : split == Split::kVal ? d.val : d.test;
  return load_manifest(path, split, d.audio_root);
}

struct TextAssets {
  SynonymLexicon lexicon;
  std::unique_ptr<TranslationCache> cache;
  TranslationProvider provider;

  TextResources resources() const { return {lexicon, BackTranslator{cache.get(), provider}}; }
};

// With `mock_fallback`, a config without any translator gets the mock one.
inline TextAssets load_text_assets(const TextResourceConfig& c, bool mock_fallback = false) {
  TextAssets a;
  if (!c.lexicon.empty() && std::filesystem::exists(c.lexicon)) a.lexicon = SynonymLexicon::load(c.lexicon);
  if (!c.bt_cache.empty()) a.cache = std::make_unique<TranslationCache>(TranslationCache::load(c.bt_cache));
  if (c.bt_provider == "mock" || (mock_fallback && c.bt_provider == "none" && !a.cache)) {
    a.provider = MockTranslator{};
  } else if (c.bt_provider == "http") {
    a.provider = HttpTranslator::from_env();
  }
  return a;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string metrics_row(const std::string& label, const RetrievalMetrics& m) {
  const std::pair<std::string, RetrievalMetrics> rows[] = {{label, m}};
  return metrics_table(rows);
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string config;
  std::vector<std::string> overrides;
  int threads = 1;
};

// Writes result.json, metrics.csv and checkpoint.json into paths.out_dir.
inline int cmd_train(const TrainOptions& o, Streams io) {
  return guarded(io, [&] {
    const RunConfig cfg = load_run_config(o.config, o.overrides);
    const TextAssets assets = load_text_assets(cfg.text_resources);
    const PairedDataset train = load_split(cfg, Split::kTrain);
    const PairedDataset val = load_split(cfg, Split::kVal);
    const PairedDataset test = load_split(cfg, Split::kTest);
    if (train.size() < 2) throw ConfigError("data.train", "training split needs at least 2 items");
    if (val.empty()) throw ConfigError("data.val", "validation split is empty");

    const std::filesystem::path out_dir = cfg.out_dir;
    std::filesystem::create_directories(out_dir);
    const TrainSetup setup = train_setup(cfg, o.threads);
    TrainHooks hooks;
    hooks.checkpoint_path = out_dir / "checkpoint.json";
    hooks.on_epoch = [&](int epoch, double loss, double map) {
      char line[128];
      std::snprintf(line, sizeof line, "epoch %3d  loss %.4f  val mAP@10 %.4f\n", epoch, loss, map);
      io.out << line << std::flush;
    };

    TrainOutput run;
    try {
      run = train_run(train, val, setup, assets.resources(), hooks);
    } catch (const TrainingAborted& e) {
      write_text(out_dir / "metrics.csv", metrics_csv(e.partial(), setup.config_hash));
      nlohmann::json j = to_json(e.partial());
      j["config_hash"] = setup.config_hash;
      write_text(out_dir / "result.json", j.dump(2) + "\n");
      throw;
    }
    write_text(out_dir / "metrics.csv", metrics_csv(run.result, setup.config_hash));
    nlohmann::json j = to_json(run.result);
    j["config_hash"] = setup.config_hash;
    j["config"] = to_json(cfg);
    if (!test.empty()) {
      const LogMelExtractor extractor(cfg.features);
      const auto metrics = evaluate_retrieval(run.best, test, extract_features(test, extractor, o.threads));
      j["test"] = to_json(metrics);
      io.out << metrics_row("test", metrics);
    }
    write_text(out_dir / "result.json", j.dump(2) + "\n");
    io.out << "wrote " << (out_dir / "result.json").string() << ", " << (out_dir / "metrics.csv").string() << ", "
           << (out_dir / "checkpoint.json").string() << "\n";
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string checkpoint;  // ignored with random_init
  std::string split = "test";
  bool random_init = false;  // evaluate an untrained model seeded by `seed`
  std::string json_out;      // defaults to <out_dir>/eval_<split>.json
  int threads = 1;
};

inline int cmd_eval(const EvalOptions& o, Streams io) {
  return guarded(io, [&] {
    const RunConfig cfg = load_run_config(o.config, o.overrides);
    Split split;
    try {
      split = split_from_string(o.split);
    } catch (const std::exception&) {
      throw ConfigError("split", "must be train, val or test");
    }
    if (!o.random_init && o.checkpoint.empty()) throw ConfigError("checkpoint", "required unless --random-init");

    Checkpoint model;
    if (o.random_init) {
      std::vector<std::string> captions;
      for (const auto& it : load_split(cfg, Split::kTrain).items)
        for (const auto& c : it.captions) captions.push_back(preprocess_caption(c));
      model.vocab = build_vocab(captions);
      ModelDims dims = cfg.model;
      dims.vocab_size = model.vocab.size();
      model.params = init_params(dims, cfg.seed);
      model.norm = NormStats::identity(dims.n_mels);
      model.tau = cfg.tau;
      model.config_hash = config_hash(cfg);
    } else {
      model = load_checkpoint(o.checkpoint);
    }
    if (model.dims().n_mels != cfg.features.n_mels)
      throw ConfigError("features.n_mels", "checkpoint expects " + std::to_string(model.dims().n_mels) +
                                               " mel bins, config has " + std::to_string(cfg.features.n_mels));

    const PairedDataset ds = load_split(cfg, split);
    if (ds.empty()) throw ConfigError("data." + o.split, "split is empty");
    const LogMelExtractor extractor(cfg.features);
    const auto metrics = evaluate_retrieval(model, ds, extract_features(ds, extractor, o.threads));
    io.out << metrics_row(o.split, metrics);

    std::filesystem::path sidecar = o.json_out;
    if (sidecar.empty()) {
      std::filesystem::create_directories(cfg.out_dir);
      sidecar = std::filesystem::path(cfg.out_dir) / ("eval_" + o.split + ".json");
    }
    nlohmann::json j = to_json(metrics);
    j["split"] = o.split;
    j["checkpoint"] = o.random_init ? "random-init" : o.checkpoint;
    j["config_hash"] = model.config_hash;
    write_text(sidecar, j.dump(2) + "\n");
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------
// smbo

struct SmboOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string space;  // overrides smbo.space
  std::optional<int> n_init;
  std::optional<int> n_trials;
  bool resume = false;
  std::string objective = "train";  // or "synthetic-quadratic"
  std::optional<int> max_new_trials;
  int threads = 1;
};

inline std::string best_config_table(const SearchSpace& space, const TrialRecord& best) {
  const nlohmann::json values = to_json(space, best.config);
  std::size_t w = std::string("parameter").size();
  for (const auto& p : space.params) w = std::max(w, p.name.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %s\n", int(w), "parameter", "best");
  out += line;
  for (const auto& p : space.params) {
    const auto& v = values.at(p.name);
    const std::string text = v.is_number_float() ? [&] {
      char b[32];
      std::snprintf(b, sizeof b, "%.4g", v.get<double>());
      return std::string(b);
    }()
                                                 : v.dump();
    std::snprintf(line, sizeof line, "%-*s  %s\n", int(w), p.name.c_str(), text.c_str());
    out += line;
  }
  return out;
}

inline int cmd_smbo(const SmboOptions& o, Streams io) {
  return guarded(io, [&] {
    RunConfig cfg = load_run_config(o.config, o.overrides);
    if (o.n_trials) cfg.smbo.n_trials = *o.n_trials;
    if (o.n_init) cfg.smbo.n_init = *o.n_init;
    if (!o.space.empty()) cfg.smbo.space = o.space;
    if (o.objective != "train" && o.objective != "synthetic-quadratic")
      throw ConfigError("objective", "must be \"train\" or \"synthetic-quadratic\"");
    if (o.max_new_trials && *o.max_new_trials < 0) throw ConfigError("max-new-trials", "must be non-negative");
    validate(cfg);

    const bool toy = o.objective == "synthetic-quadratic";
    const SearchSpace space = toy                        ? quadratic_toy_space()
                              : cfg.smbo.space.empty() ? SearchSpace::augmentation_default()
                                                       : load_search_space(cfg.smbo.space);
    const std::filesystem::path out_dir = cfg.out_dir;
    const std::filesystem::path log_path = out_dir / cfg.smbo.log;
    if (std::filesystem::exists(log_path) && !o.resume)
      throw ConfigError("smbo.log", "'" + log_path.string() + "' exists; pass --resume to continue it");
    std::filesystem::create_directories(out_dir);

    Objective objective;
    std::optional<PairedDataset> train, val;
    std::optional<TextAssets> assets;
    if (toy) {
      objective = [](const Assignment& a, int) { return TrialOutcome{quadratic_toy_objective(a), 0, false}; };
    } else {
      assets.emplace(load_text_assets(cfg.text_resources));
      train.emplace(load_split(cfg, Split::kTrain));
      val.emplace(load_split(cfg, Split::kVal));
      objective = training_objective(cfg, space, *train, *val, assets->resources(), o.threads);
    }

    SearchOptions so;
    so.n_init = cfg.smbo.n_init;
    so.n_trials = cfg.smbo.n_trials;
    so.seed = cfg.seed;
    so.tpe.gamma = cfg.smbo.gamma;
    so.tpe.n_candidates = cfg.smbo.n_candidates;
    so.tpe.prior_weight = cfg.smbo.prior_weight;
    so.tpe.bandwidth = cfg.smbo.bandwidth == "range" ? TpeBandwidth::kRange : TpeBandwidth::kAdaptive;
    so.log_path = log_path;
    so.max_new_trials = o.max_new_trials;
    const Objective logged = [&](const Assignment& a, int trial_id) {
      const TrialOutcome out = objective(a, trial_id);
      char line[160];
      std::snprintf(line, sizeof line, "trial %3d  objective %.6g%s\n", trial_id, out.objective,
                    out.pruned ? "  (pruned)" : "");
      io.out << line << std::flush;
      return out;
    };
    const SearchResult res = run_search(space, logged, so);
    if (res.resumed_from > 0) io.out << "resumed after " << res.resumed_from << " logged trials\n";
    io.out << res.trials.size() << " of " << so.n_trials << " trials in " << log_path.string() << "\n";
    if (!res.best) {
      io.err << "no trial produced an objective\n";
      return int(kFailure);
    }
    const TrialRecord& best = res.trials[*res.best];
    char line[96];
    std::snprintf(line, sizeof line, "best trial %d, objective %.6g\n", best.trial_id, *best.objective);
    io.out << line << best_config_table(space, best);
    nlohmann::json j = {{"trial_id", best.trial_id}, {"objective", *best.objective},
                        {"config", to_json(space, best.config)}, {"config_hash", config_hash(cfg)}};
    write_text(out_dir / "smbo_best.json", j.dump(2) + "\n");
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------
// augment-preview

struct PreviewOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string mode;   // "audio" or "text"
  std::string input;  // WAV file (audio) or caption file, one per line (text)
  std::string text;   // literal caption, text mode
  std::uint64_t seed = 0;
  std::string out_dir;  // audio mode; defaults to paths.out_dir
};

inline std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::string out;
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, c == 0 ? "%.6g" : ",%.6g", m(r, c));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// Original, its back translation, then each EDA operation applied on its own
// to the back-translated text.
inline std::string text_preview(const std::string& caption, const TextAugConfig& cfg, const TextResources& res,
                                std::span<const std::string> corpus, std::uint64_t seed, std::uint64_t index) {
  std::string out;
  auto line = [&](const char* label, const std::string& text) {
    char head[16];
    std::snprintf(head, sizeof head, "%-9s", label);
    out += std::string(head) + text + "\n";
  };
  line("Original", preprocess_caption(caption));
  Rng bt_rng = Rng::stream(seed, {index, 0});
  const auto words = split_words(preprocess_caption(back_translate(caption, cfg, res.translator, bt_rng)));
  line("BT", join_words(words));
  const std::pair<const char*, EdaOp> stages[] = {
      {"Insert", EdaOp::kInsert}, {"Delete", EdaOp::kDelete}, {"Swap", EdaOp::kSwap}, {"Synonym", EdaOp::kSynonym}};
  std::uint64_t k = 1;
  for (const auto& [label, op] : stages) {
    Rng rng = Rng::stream(seed, {index, k++});
    line(label, preprocess_caption(join_words(eda_apply(op, words, cfg, res.lexicon, corpus, rng))));
  }
  return out;
}

inline int cmd_augment_preview(const PreviewOptions& o, Streams io) {
  return guarded(io, [&] {
    if (o.mode != "audio" && o.mode != "text") throw ConfigError("mode", "must be \"audio\" or \"text\"");
    const RunConfig cfg = load_run_config(o.config, o.overrides);
    if (o.mode == "text") {
      std::vector<std::string> captions;
      if (!o.text.empty()) {
        captions.push_back(o.text);
      } else {
        std::ifstream in(o.input);
        if (!in) throw ConfigError("input", "cannot open '" + o.input + "'");
        for (std::string line; std::getline(in, line);)
          if (line.find_first_not_of(" \t\r") != std::string::npos) captions.push_back(line);
      }
      const TextAssets assets = load_text_assets(cfg.text_resources, /*mock_fallback=*/true);
      std::vector<std::string> processed;
      for (const auto& c : captions) processed.push_back(preprocess_caption(c));
      const TokenVocab vocab = build_vocab(processed);
      const auto corpus = vocab.words();
      for (std::size_t i = 0; i < captions.size(); ++i) {
        if (i > 0) io.out << "\n";
        io.out << text_preview(captions[i], cfg.text_aug, assets.resources(), corpus, o.seed, i);
      }
      return int(kOk);
    }

    if (o.input.empty() || !std::filesystem::exists(o.input)) throw ConfigError("input", "WAV file not found");
    const Waveform w = resample_linear(load_wav(o.input), cfg.features.target_sr);
    const LogMelExtractor extractor(cfg.features);
    const auto& aa = cfg.audio_aug;
    Rng rng = Rng::stream(o.seed, {0});
    const MelSpectrogram before = extractor(w);
    const double g = sample_gain(rng, aa.g_max);
    MelSpectrogram after = extractor(apply_gain(w, g));
    after = spec_augment(std::move(after), aa.n_f, aa.w_f, aa.n_t, aa.w_t, rng);

    const std::filesystem::path dir = o.out_dir.empty() ? cfg.out_dir : o.out_dir;
    std::filesystem::create_directories(dir);
    const std::string stem = std::filesystem::path(o.input).stem().string();
    write_text(dir / (stem + "_before.csv"), matrix_csv(before.values));
    write_text(dir / (stem + "_after.csv"), matrix_csv(after.values));
    char line[96];
    std::snprintf(line, sizeof line, "gain %+.3f dB, %d mel bins x %d frames\n", g, int(before.values.rows()),
                  int(before.values.cols()));
    io.out << line << "wrote " << (dir / (stem + "_before.csv")).string() << " and "
           << (dir / (stem + "_after.csv")).string() << "\n";
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------
// bt-cache

struct BtCacheOptions {
  std::string captions;  // one caption per line, or a CSV manifest
  std::string out;
  bool mock = false;
};

inline std::vector<std::string> read_captions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("captions", "cannot open '" + path.string() + "'");
  std::vector<std::string> captions;
  if (path.extension() == ".csv") {
    const auto rows = parse_csv(in);
    if (rows.empty()) return captions;
    if (rows.front().empty() || rows.front().front() != "file_name")
      throw FormatError(path.string() + ": CSV header must start with 'file_name'");
    for (std::size_t r = 1; r < rows.size(); ++r)
      for (std::size_t c = 1; c < rows[r].size(); ++c)
        if (!rows[r][c].empty()) captions.push_back(rows[r][c]);
  } else {
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) captions.push_back(line);
    }
  }
  return captions;
}

inline int cmd_bt_cache(const BtCacheOptions& o, Streams io) {
  return guarded(io, [&] {
    if (o.out.empty()) throw ConfigError("out", "output path is required");
    const auto captions = read_captions(o.captions);
    TranslationProvider provider;
    if (o.mock) provider = MockTranslator{};
    else provider = HttpTranslator::from_env();
    const auto report = cache_build(captions, kAllPivots, provider, o.out);
    io.out << report.added << " new entries (" << report.skipped << " already cached)\n";
    if (!report.failed.empty()) {
      io.err << report.failed.size() << " translations failed, first: \"" << report.failed.front().first << "\" via "
             << pivot_code(report.failed.front().second) << "; partial cache kept in " << o.out << "\n";
      return int(kService);
    }
    return int(kOk);
  });
}

// ---------------------------------------------------------------------------
// synth-data

struct SynthDataOptions {
  std::string out_dir;
  int n_classes = 8;
  int n_train = 200;
  int n_val = 100;
  int n_test = 100;
  std::uint64_t seed = 0;
};

// Writes <out_dir>/<split>/manifest.csv plus float WAV files per split.
inline int cmd_synth_data(const SynthDataOptions& o, Streams io) {
  return guarded(io, [&] {
    if (o.out_dir.empty()) throw ConfigError("out", "output directory is required");
    if (o.n_classes < 2) throw ConfigError("classes", "must be at least 2");
    if (o.n_train < 0 || o.n_val < 0 || o.n_test < 0) throw ConfigError("items", "counts must be non-negative");
    for (const auto& [split, n] : {std::pair{Split::kTrain, o.n_train}, {Split::kVal, o.n_val}, {Split::kTest, o.n_test}}) {
      const auto dir = std::filesystem::path(o.out_dir) / to_string(split);
      write_manifest(synth_dataset(o.n_classes, n, o.seed, split), dir, "manifest.csv");
      io.out << to_string(split) << ": " << n << " items -> " << (dir / "manifest.csv").string() << "\n";
    }
    return int(kOk);
  });
}

}  // namespace lbar::cli
