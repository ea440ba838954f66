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

// lbar: command-line front end for training, evaluation, hyperparameter search
// and data preparation.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lbar/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = lbar::cli;
  CLI::App app{"Language-based audio retrieval: training, evaluation and augmentation search"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for feature extraction")->check(CLI::PositiveNumber);

  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub, std::string& path) {
    sub->add_option("config", path, "Run configuration JSON")->required();
    sub->add_option("--set", overrides, "Override a config key, e.g. optim.epochs=5")->take_all();
  };

  cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes result.json, metrics.csv, checkpoint.json");
  add_config(train_cmd, train.config);

  cli::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_config(eval_cmd, eval.config);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint JSON");
  eval_cmd->add_option("--split", eval.split, "train, val or test")->capture_default_str();
  eval_cmd->add_flag("--random-init", eval.random_init, "Evaluate an untrained model");
  eval_cmd->add_option("--json", eval.json_out, "Metrics sidecar path");

  cli::SmboOptions smbo;
  auto* smbo_cmd = app.add_subcommand("smbo", "Search augmentation hyperparameters");
  add_config(smbo_cmd, smbo.config);
  smbo_cmd->add_option("--space", smbo.space, "Search space JSON");
  smbo_cmd->add_option("--n-init", smbo.n_init, "Random initial trials");
  smbo_cmd->add_option("--n-trials", smbo.n_trials, "Total trials, including the random ones");
  smbo_cmd->add_flag("--resume", smbo.resume, "Continue an existing trial log");
  smbo_cmd->add_option("--objective", smbo.objective, "train or synthetic-quadratic")->capture_default_str();
  smbo_cmd->add_option("--max-new-trials", smbo.max_new_trials, "Stop after this many new trials");

  cli::PreviewOptions preview;
  auto* preview_cmd = app.add_subcommand("augment-preview", "Show augmentations of one input");
  add_config(preview_cmd, preview.config);
  preview_cmd->add_option("--mode", preview.mode, "audio or text")->required();
  preview_cmd->add_option("--input", preview.input, "WAV file (audio) or caption file (text)");
  preview_cmd->add_option("--text", preview.text, "Literal caption (text mode)");
  preview_cmd->add_option("--seed", preview.seed, "Preview seed")->capture_default_str();
  preview_cmd->add_option("--out", preview.out_dir, "Output directory for audio CSVs");

  cli::BtCacheOptions bt;
  auto* bt_cmd = app.add_subcommand("bt-cache", "Build or extend a back-translation cache");
  bt_cmd->add_option("captions", bt.captions, "Caption file (one per line) or CSV manifest")->required();
  bt_cmd->add_option("--out", bt.out, "Cache file (JSONL)")->required();
  bt_cmd->add_flag("--mock", bt.mock, "Use the offline mock translator");

  cli::SynthDataOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic paired dataset");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--classes", synth.n_classes)->capture_default_str();
  synth_cmd->add_option("--train", synth.n_train)->capture_default_str();
  synth_cmd->add_option("--val", synth.n_val)->capture_default_str();
  synth_cmd->add_option("--test", synth.n_test)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kUsage;
  }

  const cli::Streams io{std::cout, std::cerr};
  if (*train_cmd) return train.overrides = overrides, train.threads = threads, cli::cmd_train(train, io);
  if (*eval_cmd) return eval.overrides = overrides, eval.threads = threads, cli::cmd_eval(eval, io);
  if (*smbo_cmd) return smbo.overrides = overrides, smbo.threads = threads, cli::cmd_smbo(smbo, io);
  if (*preview_cmd) return preview.overrides = overrides, cli::cmd_augment_preview(preview, io);
  if (*bt_cmd) return cli::cmd_bt_cache(bt, io);
  if (*synth_cmd) return cli::cmd_synth_data(synth, io);
  return cli::kUsage;
}
