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

// Audio and caption encoders mapping into a shared embedding space, the
// cosine similarity matrix, the symmetric cross-entropy (NT-Xent) objective
// and its exact reverse-mode gradient.
//
// Audio encoder: valid-frame time pooling (mean + max) / 2 per mel bin, then
// FC -> ReLU -> FC. Caption encoder: mean of token embeddings over non-PAD
// positions, then FC -> ReLU -> FC. All math in double precision.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <concepts>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "lbar/data/features.hpp"
#include "lbar/data/text.hpp"
#include "lbar/error.hpp"
#include "lbar/rng.hpp"

namespace lbar {

struct ModelDims {
  int n_mels = 64;
  int embed_dim = 64;
  int audio_hidden = 128;
  int text_hidden = 128;
  int token_embed_dim = 64;
  int vocab_size = 2;

  void validate() const {
    auto positive = [](int v, const char* key) {
      if (v < 1) throw ConfigError(key, "must be at least 1");
    };
    positive(n_mels, "n_mels");
    positive(embed_dim, "embed_dim");
    positive(audio_hidden, "audio_hidden");
    positive(text_hidden, "text_hidden");
    positive(token_embed_dim, "token_embed_dim");
    positive(vocab_size, "vocab_size");
  }

  bool operator==(const ModelDims&) const = default;
};

// Trainable arrays. Biases are stored as 1 x n matrices so every array can be
// visited uniformly.
struct ParamArrays {
  Eigen::MatrixXd w1;         // [n_mels x audio_hidden]
  Eigen::MatrixXd b1;         // [1 x audio_hidden]
  Eigen::MatrixXd w2;         // [audio_hidden x embed_dim]
  Eigen::MatrixXd b2;         // [1 x embed_dim]
  Eigen::MatrixXd embedding;  // [vocab_size x token_embed_dim]
  Eigen::MatrixXd w3;         // [token_embed_dim x text_hidden]
  Eigen::MatrixXd b3;         // [1 x text_hidden]
  Eigen::MatrixXd w4;         // [text_hidden x embed_dim]
  Eigen::MatrixXd b4;         // [1 x embed_dim]
};

// Calls f(name, array) for every array in a fixed order.
template <class Arrays, class F>
  requires std::derived_from<std::remove_const_t<Arrays>, ParamArrays>
void for_each_array(Arrays& p, F&& f) {
  f("W1", p.w1);
  f("b1", p.b1);
  f("W2", p.w2);
  f("b2", p.b2);
  f("E", p.embedding);
  f("W3", p.w3);
  f("b3", p.b3);
  f("W4", p.w4);
  f("b4", p.b4);
}

// Calls f(name, a, b) over matching arrays of two parameter-shaped sets.
template <class A, class B, class F>
void for_each_array_pair(A& a, B& b, F&& f) {
  f("W1", a.w1, b.w1);
  f("b1", a.b1, b.b1);
  f("W2", a.w2, b.w2);
  f("b2", a.b2, b.b2);
  f("E", a.embedding, b.embedding);
  f("W3", a.w3, b.w3);
  f("b3", a.b3, b.b3);
  f("W4", a.w4, b.w4);
  f("b4", a.b4, b.b4);
}

struct ModelParams : ParamArrays {
  ModelDims dims() const {
    return {int(w1.rows()), int(w2.cols()), int(w1.cols()), int(w3.cols()), int(embedding.cols()),
            int(embedding.rows())};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_array(*this, [&](const char*, const Eigen::MatrixXd& m) { n += std::size_t(m.size()); });
    return n;
  }
};

struct GradientSet : ParamArrays {
  static GradientSet zeros_like(const ModelParams& p) {
    GradientSet g;
    for_each_array_pair(g, p, [](const char*, Eigen::MatrixXd& dst, const Eigen::MatrixXd& src) {
      dst = Eigen::MatrixXd::Zero(src.rows(), src.cols());
    });
    return g;
  }
};

inline void check_shapes(const ModelParams& p, const ModelDims& d) {
  auto expect = [](const Eigen::MatrixXd& m, int r, int c, const char* name) {
    if (m.rows() != r || m.cols() != c)
      throw std::invalid_argument(std::string("parameter ") + name + " has shape " + std::to_string(m.rows()) + "x" +
                                  std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                                  std::to_string(c));
  };
  expect(p.w1, d.n_mels, d.audio_hidden, "W1");
  expect(p.b1, 1, d.audio_hidden, "b1");
  expect(p.w2, d.audio_hidden, d.embed_dim, "W2");
  expect(p.b2, 1, d.embed_dim, "b2");
  expect(p.embedding, d.vocab_size, d.token_embed_dim, "E");
  expect(p.w3, d.token_embed_dim, d.text_hidden, "W3");
  expect(p.b3, 1, d.text_hidden, "b3");
  expect(p.w4, d.text_hidden, d.embed_dim, "W4");
  expect(p.b4, 1, d.embed_dim, "b4");
}

// Weights ~ U[-s, s] with s = sqrt(6 / (fan_in + fan_out)); biases zero;
// token embeddings ~ N(0, 0.02).
inline ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng = Rng::stream(seed, {0x1A17ULL});
  auto glorot = [&](int fan_in, int fan_out) {
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd m(fan_in, fan_out);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-s, s);
    return m;
  };
  ModelParams p;
  p.w1 = glorot(dims.n_mels, dims.audio_hidden);
  p.b1 = Eigen::MatrixXd::Zero(1, dims.audio_hidden);
  p.w2 = glorot(dims.audio_hidden, dims.embed_dim);
  p.b2 = Eigen::MatrixXd::Zero(1, dims.embed_dim);
  p.embedding.resize(dims.vocab_size, dims.token_embed_dim);
  for (Eigen::Index j = 0; j < p.embedding.cols(); ++j)
    for (Eigen::Index i = 0; i < p.embedding.rows(); ++i) p.embedding(i, j) = rng.normal(0.0, 0.02);
  p.w3 = glorot(dims.token_embed_dim, dims.text_hidden);
  p.b3 = Eigen::MatrixXd::Zero(1, dims.text_hidden);
  p.w4 = glorot(dims.text_hidden, dims.embed_dim);
  p.b4 = Eigen::MatrixXd::Zero(1, dims.embed_dim);
  return p;
}

namespace detail {

struct HeadTape {
  Eigen::MatrixXd input;   // [N x in]
  Eigen::MatrixXd hidden;  // post-ReLU [N x hidden]
  Eigen::MatrixXd output;  // [N x D]
};

inline HeadTape head_forward(Eigen::MatrixXd input, const Eigen::MatrixXd& wa, const Eigen::MatrixXd& ba,
                             const Eigen::MatrixXd& wb, const Eigen::MatrixXd& bb) {
  HeadTape t;
  t.input = std::move(input);
  t.hidden = ((t.input * wa).rowwise() + ba.row(0)).cwiseMax(0.0);
  t.output = (t.hidden * wb).rowwise() + bb.row(0);
  return t;
}

// Returns d(input).
inline Eigen::MatrixXd head_backward(const HeadTape& t, const Eigen::MatrixXd& d_out, const Eigen::MatrixXd& wa,
                                     const Eigen::MatrixXd& wb, Eigen::MatrixXd& dwa, Eigen::MatrixXd& dba,
                                     Eigen::MatrixXd& dwb, Eigen::MatrixXd& dbb) {
  dwb += t.hidden.transpose() * d_out;
  dbb += d_out.colwise().sum();
  Eigen::MatrixXd d_hidden = d_out * wb.transpose();
  d_hidden = (t.hidden.array() > 0.0).select(d_hidden, 0.0);
  dwa += t.input.transpose() * d_hidden;
  dba += d_hidden.colwise().sum();
  return d_hidden * wa.transpose();
}

struct AudioTape {
  HeadTape head;
  std::vector<std::vector<int>> argmax;  // [N][n_mels], first index on ties
  std::vector<int> n_valid;
};

inline AudioTape audio_forward(std::span<const MelSpectrogram> batch, const ModelParams& p) {
  if (batch.empty()) throw std::invalid_argument("embed_audio on an empty batch");
  const Eigen::Index n_mels = p.w1.rows();
  Eigen::MatrixXd pooled(Eigen::Index(batch.size()), n_mels);
  AudioTape tape;
  tape.argmax.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& m = batch[i];
    if (m.values.rows() != n_mels)
      throw std::invalid_argument("spectrogram has " + std::to_string(m.values.rows()) + " mel bins, model expects " +
                                  std::to_string(n_mels));
    if (m.n_frames_valid < 1 || m.n_frames_valid > m.values.cols())
      throw std::invalid_argument("spectrogram has an invalid valid-frame count");
    tape.n_valid.push_back(m.n_frames_valid);
    auto& arg = tape.argmax[i];
    arg.resize(std::size_t(n_mels));
    for (Eigen::Index b = 0; b < n_mels; ++b) {
      double sum = 0.0, best = m.values(b, 0);
      int best_t = 0;
      for (int t = 0; t < m.n_frames_valid; ++t) {
        const double v = m.values(b, t);
        sum += v;
        if (v > best) best = v, best_t = t;
      }
      arg[std::size_t(b)] = best_t;
      pooled(Eigen::Index(i), b) = 0.5 * (sum / m.n_frames_valid + best);
    }
  }
  tape.head = head_forward(std::move(pooled), p.w1, p.b1, p.w2, p.b2);
  return tape;
}

struct TextTape {
  HeadTape head;
  std::vector<int> counts;  // non-PAD tokens per sequence
};

inline TextTape text_forward(std::span<const TokenSequence> batch, const ModelParams& p) {
  if (batch.empty()) throw std::invalid_argument("embed_text on an empty batch");
  const Eigen::Index vocab = p.embedding.rows();
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(Eigen::Index(batch.size()), p.embedding.cols());
  TextTape tape;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    int count = 0;
    for (int id : batch[i].ids) {
      if (id < 0 || id >= vocab) throw std::invalid_argument("token id " + std::to_string(id) + " outside vocabulary");
      if (id == kPadId) continue;
      pooled.row(Eigen::Index(i)) += p.embedding.row(id);
      ++count;
    }
    if (count > 0) pooled.row(Eigen::Index(i)) /= double(count);
    tape.counts.push_back(count);
  }
  tape.head = head_forward(std::move(pooled), p.w3, p.b3, p.w4, p.b4);
  return tape;
}

}  // namespace detail

// [N x D] audio embeddings.
inline Eigen::MatrixXd embed_audio(std::span<const MelSpectrogram> batch, const ModelParams& p) {
  return detail::audio_forward(batch, p).head.output;
}

// [N x D] caption embeddings. Empty sequences pool to the zero vector.
inline Eigen::MatrixXd embed_text(std::span<const TokenSequence> batch, const ModelParams& p) {
  return detail::text_forward(batch, p).head.output;
}

inline constexpr double kNormGuard = 1e-12;

// C_ij = cos(audio_i, text_j), rows audio, columns captions.
struct SimilarityMatrix {
  Eigen::MatrixXd values;

  Eigen::Index size() const { return values.rows(); }
};

inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd norms = x.rowwise().norm().array() + kNormGuard;
  return norms.cwiseInverse().asDiagonal() * x;
}

inline SimilarityMatrix similarity_matrix(const Eigen::MatrixXd& audio, const Eigen::MatrixXd& text) {
  if (audio.cols() != text.cols()) throw std::invalid_argument("embedding widths differ");
  return {normalize_rows(audio) * normalize_rows(text).transpose()};
}

namespace detail {

// Row-wise log-softmax of `logits`.
inline Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - mx;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  return shifted.colwise() - lse;
}

}  // namespace detail

struct LossAndGrad {
  double loss = 0.0;
  Eigen::MatrixXd d_similarity;  // dL/dC
};

// L = 1/(2N) * sum_i [CE(row i of C/tau, e_i) + CE(column i of C/tau, e_i)].
inline LossAndGrad nt_xent_with_grad(const SimilarityMatrix& c, double tau) {
  const Eigen::Index n = c.values.rows();
  if (c.values.cols() != n) throw std::invalid_argument("similarity matrix must be square");
  if (n < 2) throw std::invalid_argument("NT-Xent needs a batch of at least 2 pairs");
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  const Eigen::MatrixXd logits = c.values / tau;
  const Eigen::MatrixXd row_lsm = detail::log_softmax_rows(logits);
  const Eigen::MatrixXd col_lsm = detail::log_softmax_rows(logits.transpose()).transpose();
  LossAndGrad out;
  out.loss = -(row_lsm.diagonal().sum() + col_lsm.diagonal().sum()) / (2.0 * n);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  out.d_similarity = ((row_lsm.array().exp().matrix() - eye) + (col_lsm.array().exp().matrix() - eye)) / (2.0 * n * tau);
  return out;
}

inline double nt_xent(const SimilarityMatrix& c, double tau = 1.0) { return nt_xent_with_grad(c, tau).loss; }

namespace detail {

// Gradient through x -> x / (||x|| + guard), row by row.
inline Eigen::MatrixXd normalize_rows_backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d_unit) {
  Eigen::MatrixXd dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    const double denom = n + kNormGuard;
    dx.row(i) = d_unit.row(i) / denom;
    if (n > 0.0) dx.row(i) -= x.row(i) * (x.row(i).dot(d_unit.row(i)) / (n * denom * denom));
  }
  return dx;
}

}  // namespace detail

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
  // dL/d(spectrogram values) per example; padding columns are zero.
  std::vector<Eigen::MatrixXd> audio_input_grads;
};

// Loss and exact gradients of nt_xent(similarity_matrix(embed_audio, embed_text)).
// Max pooling routes its gradient to the first maximal frame.
inline BackwardResult backward(std::span<const MelSpectrogram> audio, std::span<const TokenSequence> text,
                               const ModelParams& p, double tau) {
  if (audio.size() != text.size()) throw std::invalid_argument("audio and caption batches differ in size");
  const auto at = detail::audio_forward(audio, p);
  const auto tt = detail::text_forward(text, p);
  const Eigen::MatrixXd a_unit = normalize_rows(at.head.output);
  const Eigen::MatrixXd t_unit = normalize_rows(tt.head.output);
  const auto lg = nt_xent_with_grad(SimilarityMatrix{a_unit * t_unit.transpose()}, tau);
  if (!std::isfinite(lg.loss)) throw std::domain_error("non-finite loss");

  BackwardResult r;
  r.loss = lg.loss;
  r.grads = GradientSet::zeros_like(p);
  const Eigen::MatrixXd d_audio = detail::normalize_rows_backward(at.head.output, lg.d_similarity * t_unit);
  const Eigen::MatrixXd d_text = detail::normalize_rows_backward(tt.head.output, lg.d_similarity.transpose() * a_unit);

  const Eigen::MatrixXd d_pooled_audio =
      detail::head_backward(at.head, d_audio, p.w1, p.w2, r.grads.w1, r.grads.b1, r.grads.w2, r.grads.b2);
  const Eigen::MatrixXd d_pooled_text =
      detail::head_backward(tt.head, d_text, p.w3, p.w4, r.grads.w3, r.grads.b3, r.grads.w4, r.grads.b4);

  for (std::size_t i = 0; i < text.size(); ++i) {
    if (tt.counts[i] == 0) continue;
    const auto row = d_pooled_text.row(Eigen::Index(i)) / double(tt.counts[i]);
    for (int id : text[i].ids)
      if (id != kPadId) r.grads.embedding.row(id) += row;
  }

  r.audio_input_grads.reserve(audio.size());
  for (std::size_t i = 0; i < audio.size(); ++i) {
    const auto& m = audio[i];
    const int nv = at.n_valid[i];
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m.values.rows(), m.values.cols());
    for (Eigen::Index b = 0; b < m.values.rows(); ++b) {
      const double d = d_pooled_audio(Eigen::Index(i), b);
      g.row(b).head(nv).setConstant(0.5 * d / nv);
      g(b, at.argmax[i][std::size_t(b)]) += 0.5 * d;
    }
    r.audio_input_grads.push_back(std::move(g));
  }
  return r;
}

}  // namespace lbar
