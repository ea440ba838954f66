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

// Trains a small retrieval model on synthetic sound/caption pairs and compares
// it with its untrained initialization on a held-out split.
//
//   retrieval_demo [epochs] [seed]

#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>

#include "lbar/lbar.hpp"

int main(int argc, char** argv) {
  const int epochs = argc > 1 ? std::atoi(argv[1]) : 20;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 0;

  const auto train = lbar::synth_dataset(8, 200, seed, lbar::Split::kTrain);
  const auto val = lbar::synth_dataset(8, 100, seed, lbar::Split::kVal);
  const auto test = lbar::synth_dataset(8, 100, seed, lbar::Split::kTest);

  lbar::TrainSetup setup;
  setup.optim.epochs = epochs;
  setup.optim.seed = seed;
  setup.augment = false;

  const lbar::TextResources text;
  lbar::TrainHooks hooks;
  hooks.on_epoch = [](int epoch, double loss, double map) {
    std::cout << "epoch " << epoch << "  loss " << loss << "  val mAP@10 " << map << "\n";
  };
  const auto run = lbar::train_run(train, val, setup, text, hooks);

  lbar::Checkpoint untrained = run.best;
  lbar::ModelDims dims = untrained.dims();
  untrained.params = lbar::init_params(dims, seed);
  untrained.norm = lbar::NormStats::identity(dims.n_mels);

  const lbar::LogMelExtractor extractor(setup.features);
  const auto bank = lbar::extract_features(test, extractor);
  const std::pair<std::string, lbar::RetrievalMetrics> rows[] = {
      {"untrained", lbar::evaluate_retrieval(untrained, test, bank)},
      {"trained", lbar::evaluate_retrieval(run.best, test, bank)},
  };
  std::cout << "\n" << lbar::metrics_table(rows);
  return 0;
}
