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

// Model checkpoints: parameters plus everything needed to embed new inputs
// (vocabulary, frequency normalization statistics, temperature).
//
// {"version": 1, "dims": {...}, "arrays": {name: {"shape": [r, c], "data": [...]}},
//  "tau": ..., "vocab": [...], "norm_stats": {"mean", "var", "count"}, "config_hash": "..."}
//
// Array data is row-major. Doubles are written with round-trip precision.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>
#include "lbar/data/normalize.hpp"
#include "lbar/data/text.hpp"
#include "lbar/error.hpp"
#include "lbar/model.hpp"

namespace lbar {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  NormStats norm;
  TokenVocab vocab;
  double tau = 1.0;
  std::string config_hash;

  ModelDims dims() const { return params.dims(); }
};

inline nlohmann::json to_json(const ModelDims& d) {
  return {{"n_mels", d.n_mels},           {"embed_dim", d.embed_dim},
          {"audio_hidden", d.audio_hidden}, {"text_hidden", d.text_hidden},
          {"token_embed_dim", d.token_embed_dim}, {"vocab_size", d.vocab_size}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.n_mels = j.at("n_mels").get<int>();
  d.embed_dim = j.at("embed_dim").get<int>();
  d.audio_hidden = j.at("audio_hidden").get<int>();
  d.text_hidden = j.at("text_hidden").get<int>();
  d.token_embed_dim = j.at("token_embed_dim").get<int>();
  d.vocab_size = j.at("vocab_size").get<int>();
  return d;
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json arrays = nlohmann::json::object();
  for_each_array(c.params, [&](const char* name, const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(std::size_t(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    arrays[name] = {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
  });
  std::vector<std::string> words(c.vocab.words().begin(), c.vocab.words().end());
  return {{"version", kCheckpointVersion},
          {"dims", to_json(c.dims())},
          {"arrays", std::move(arrays)},
          {"tau", c.tau},
          {"vocab", std::move(words)},
          {"norm_stats",
           {{"mean", std::vector<double>(c.norm.mean.data(), c.norm.mean.data() + c.norm.mean.size())},
            {"var", std::vector<double>(c.norm.var.data(), c.norm.var.data() + c.norm.var.size())},
            {"count", c.norm.count}}},
          {"config_hash", c.config_hash}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != kCheckpointVersion) throw PersistenceError("unsupported checkpoint version");
  Checkpoint c;
  const ModelDims dims = dims_from_json(j.at("dims"));
  dims.validate();
  const auto& arrays = j.at("arrays");
  for_each_array(c.params, [&](const char* name, Eigen::MatrixXd& m) {
    if (!arrays.contains(name)) throw PersistenceError(std::string("checkpoint lacks array ") + name);
    const auto& a = arrays.at(name);
    const auto shape = a.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = a.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] * shape[1] != Eigen::Index(data.size()))
      throw PersistenceError(std::string("checkpoint array ") + name + " has inconsistent shape");
    m.resize(shape[0], shape[1]);
    for (Eigen::Index r = 0; r < shape[0]; ++r)
      for (Eigen::Index col = 0; col < shape[1]; ++col) m(r, col) = data[std::size_t(r * shape[1] + col)];
  });
  try {
    check_shapes(c.params, dims);
  } catch (const std::invalid_argument& e) {
    throw PersistenceError(std::string("checkpoint: ") + e.what());
  }
  c.tau = j.at("tau").get<double>();
  for (const auto& w : j.at("vocab").get<std::vector<std::string>>()) c.vocab.add(w);
  if (c.vocab.size() != dims.vocab_size) throw PersistenceError("checkpoint vocabulary size disagrees with dims");
  const auto& ns = j.at("norm_stats");
  const auto mean = ns.at("mean").get<std::vector<double>>();
  const auto var = ns.at("var").get<std::vector<double>>();
  if (int(mean.size()) != dims.n_mels || int(var.size()) != dims.n_mels)
    throw PersistenceError("checkpoint normalization statistics disagree with n_mels");
  c.norm.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), Eigen::Index(mean.size()));
  c.norm.var = Eigen::Map<const Eigen::VectorXd>(var.data(), Eigen::Index(var.size()));
  c.norm.count = ns.at("count").get<long long>();
  c.config_hash = j.value("config_hash", "");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(c).dump() << "\n";
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open checkpoint '" + path.string() + "'");
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError("checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace lbar
