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

// Sequential model-based optimization: random initialization followed by
// Tree-structured Parzen Estimator suggestions, with a JSONL trial log that
// supports resuming.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>
#include "lbar/error.hpp"
#include "lbar/rng.hpp"

namespace lbar {

struct UniformFloat {
  double lo = 0.0;
  double hi = 1.0;
};

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct Choice {
  std::vector<nlohmann::json> values;
};

struct ParamSpec {
  std::string name;
  std::variant<UniformFloat, IntRange, Choice> kind;

  void validate() const {
    if (name.empty()) throw ConfigError("name", "parameter name is empty");
    if (const auto* f = std::get_if<UniformFloat>(&kind); f && !(f->lo < f->hi))
      throw ConfigError(name, "float range needs lo < hi");
    if (const auto* i = std::get_if<IntRange>(&kind); i && i->lo > i->hi)
      throw ConfigError(name, "int range needs lo <= hi");
    if (const auto* c = std::get_if<Choice>(&kind); c && c->values.empty())
      throw ConfigError(name, "choice needs at least one value");
  }
};

struct SearchSpace {
  std::vector<ParamSpec> params;

  std::size_t size() const { return params.size(); }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& p : params) {
      p.validate();
      if (!seen.insert(p.name).second) throw ConfigError(p.name, "duplicate parameter name");
    }
  }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) return i;
    return std::nullopt;
  }

  // The augmentation search space: text (EDA, back translation) and audio
  // (SpecAugment, gain, Freq-MixStyle) parameters.
  static SearchSpace augmentation_default() {
    return {{{"p_EDA", UniformFloat{0.0, 1.0}},
             {"p_syn", UniformFloat{0.0, 0.3}},
             {"p_swp", UniformFloat{0.0, 0.3}},
             {"p_ins", UniformFloat{0.0, 0.3}},
             {"p_del", UniformFloat{0.0, 0.3}},
             {"p_bt", UniformFloat{0.0, 1.0}},
             {"n_f", IntRange{0, 1}},
             {"w_f", IntRange{1, 32}},
             {"n_t", IntRange{0, 8}},
             {"w_t", IntRange{1, 64}},
             {"g_max", IntRange{0, 6}},
             {"p_MS", UniformFloat{0.0, 1.0}},
             {"alpha", UniformFloat{0.0, 1.0}}}};
  }
};

inline nlohmann::json to_json(const SearchSpace& space) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : space.params) {
    nlohmann::json j = {{"name", p.name}};
    if (const auto* f = std::get_if<UniformFloat>(&p.kind)) {
      j["type"] = "float", j["low"] = f->lo, j["high"] = f->hi;
    } else if (const auto* i = std::get_if<IntRange>(&p.kind)) {
      j["type"] = "int", j["low"] = i->lo, j["high"] = i->hi;
    } else {
      j["type"] = "choice", j["values"] = std::get<Choice>(p.kind).values;
    }
    out.push_back(std::move(j));
  }
  return out;
}

inline SearchSpace search_space_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("", "search space must be a JSON list");
  SearchSpace space;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& rec = j[k];
    const std::string where = "[" + std::to_string(k) + "]";
    try {
      ParamSpec p;
      p.name = rec.at("name").get<std::string>();
      const auto type = rec.at("type").get<std::string>();
      if (type == "float") p.kind = UniformFloat{rec.at("low").get<double>(), rec.at("high").get<double>()};
      else if (type == "int") p.kind = IntRange{rec.at("low").get<std::int64_t>(), rec.at("high").get<std::int64_t>()};
      else if (type == "choice") p.kind = Choice{rec.at("values").get<std::vector<nlohmann::json>>()};
      else throw ConfigError(where + ".type", "unknown parameter type '" + type + "'");
      space.params.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where, e.what());
    }
  }
  space.validate();
  return space;
}

inline SearchSpace load_search_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open search space '" + path.string() + "'");
  try {
    return search_space_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

// One value per space dimension. Integers are stored as whole doubles and
// choices as the index of the chosen value.
struct Assignment {
  std::vector<double> values;

  bool operator==(const Assignment&) const = default;
};

inline nlohmann::json to_json(const SearchSpace& space, const Assignment& a) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t d = 0; d < space.size(); ++d) {
    const auto& p = space.params[d];
    if (std::holds_alternative<UniformFloat>(p.kind)) j[p.name] = a.values[d];
    else if (std::holds_alternative<IntRange>(p.kind)) j[p.name] = std::int64_t(a.values[d]);
    else j[p.name] = std::get<Choice>(p.kind).values.at(std::size_t(a.values[d]));
  }
  return j;
}

inline Assignment assignment_from_json(const SearchSpace& space, const nlohmann::json& j) {
  Assignment a;
  for (const auto& p : space.params) {
    if (!j.contains(p.name)) throw PersistenceError("config lacks parameter '" + p.name + "'");
    const auto& v = j.at(p.name);
    if (const auto* c = std::get_if<Choice>(&p.kind)) {
      auto it = std::find(c->values.begin(), c->values.end(), v);
      if (it == c->values.end()) throw PersistenceError("value of '" + p.name + "' is not one of its choices");
      a.values.push_back(double(it - c->values.begin()));
    } else {
      if (!v.is_number()) throw PersistenceError("value of '" + p.name + "' is not a number");
      a.values.push_back(v.get<double>());
    }
  }
  if (j.size() != space.size()) throw PersistenceError("config has parameters outside the search space");
  return a;
}

inline bool contains(const SearchSpace& space, const Assignment& a) {
  if (a.values.size() != space.size()) return false;
  for (std::size_t d = 0; d < space.size(); ++d) {
    const double v = a.values[d];
    const auto& k = space.params[d].kind;
    if (const auto* f = std::get_if<UniformFloat>(&k)) {
      if (!(v >= f->lo && v <= f->hi)) return false;
    } else if (const auto* i = std::get_if<IntRange>(&k)) {
      if (v != std::round(v) || v < double(i->lo) || v > double(i->hi)) return false;
    } else if (v != std::round(v) || v < 0 || v >= double(std::get<Choice>(k).values.size())) {
      return false;
    }
  }
  return true;
}

inline Assignment sample_random(const SearchSpace& space, Rng& rng) {
  Assignment a;
  for (const auto& p : space.params) {
    if (const auto* f = std::get_if<UniformFloat>(&p.kind)) a.values.push_back(rng.uniform(f->lo, f->hi));
    else if (const auto* i = std::get_if<IntRange>(&p.kind)) a.values.push_back(double(rng.uniform_int(i->lo, i->hi)));
    else a.values.push_back(double(rng.index(std::get<Choice>(p.kind).values.size())));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Trials

enum class TrialStatus { kCompleted, kPruned, kFailed };

inline const char* to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::kCompleted: return "completed";
    case TrialStatus::kPruned: return "pruned";
    case TrialStatus::kFailed: return "failed";
  }
  return "?";
}

inline TrialStatus trial_status_from_string(const std::string& s) {
  if (s == "completed") return TrialStatus::kCompleted;
  if (s == "pruned") return TrialStatus::kPruned;
  if (s == "failed") return TrialStatus::kFailed;
  throw PersistenceError("unknown trial status '" + s + "'");
}

struct TrialRecord {
  int trial_id = 0;
  Assignment config;
  std::optional<double> objective;  // best validation score; absent when failed
  TrialStatus status = TrialStatus::kCompleted;
  int epochs_run = 0;
  std::string sampler;  // "random" or "tpe"
  std::string error;

  bool usable() const { return status != TrialStatus::kFailed && objective.has_value(); }
};

inline constexpr int kTrialLogSchema = 1;

inline nlohmann::json to_json(const SearchSpace& space, const TrialRecord& t) {
  nlohmann::json j = {{"schema", kTrialLogSchema},
                      {"trial_id", t.trial_id},
                      {"config", to_json(space, t.config)},
                      {"objective", t.objective ? nlohmann::json(*t.objective) : nlohmann::json(nullptr)},
                      {"status", to_string(t.status)},
                      {"epochs_run", t.epochs_run},
                      {"sampler", t.sampler}};
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

inline TrialRecord trial_from_json(const SearchSpace& space, const nlohmann::json& j) {
  if (j.value("schema", 0) != kTrialLogSchema) throw PersistenceError("unsupported trial log schema");
  TrialRecord t;
  t.trial_id = j.at("trial_id").get<int>();
  t.config = assignment_from_json(space, j.at("config"));
  if (!contains(space, t.config)) throw PersistenceError("trial config lies outside the search space");
  if (!j.at("objective").is_null()) t.objective = j.at("objective").get<double>();
  t.status = trial_status_from_string(j.at("status").get<std::string>());
  t.epochs_run = j.at("epochs_run").get<int>();
  t.sampler = j.value("sampler", "");
  t.error = j.value("error", "");
  if (t.status != TrialStatus::kFailed && !t.objective) throw PersistenceError("non-failed trial without objective");
  return t;
}

// Reads a trial log; trial ids must run 0, 1, 2, ... in order.
inline std::vector<TrialRecord> read_trial_log(const std::filesystem::path& path, const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open trial log '" + path.string() + "'");
  std::vector<TrialRecord> trials;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      trials.push_back(trial_from_json(space, nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw PersistenceError(where + e.what());
    } catch (const PersistenceError& e) {
      throw PersistenceError(where + e.what());
    }
    if (trials.back().trial_id != int(trials.size()) - 1)
      throw PersistenceError(where + "trial ids are not consecutive");
  }
  return trials;
}

// ---------------------------------------------------------------------------
// Tree-structured Parzen Estimator

enum class TpeBandwidth {
  kAdaptive,  // per-kernel width from neighbour gaps
  kRange,     // shared width max(range * 1.06 * n^(-1/5), range / 100)
};

struct TpeOptions {
  double gamma = 0.25;    // fraction of trials forming the "good" set
  int n_candidates = 24;  // draws from l(x) scored by l(x) / g(x)
  int n_startup = 10;     // below this many usable trials, sample randomly
  double prior_weight = 1.0;  // weight of the prior kernel relative to one observation
  TpeBandwidth bandwidth = TpeBandwidth::kAdaptive;
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Mixture of Gaussians truncated to [lo, hi]: one kernel per observation
// plus an optional prior kernel centred on the range with width equal to it.
class TruncatedKde {
 public:
  TruncatedKde(const std::vector<double>& observed, double lo, double hi, double prior_weight,
               TpeBandwidth rule)
      : lo_(lo), hi_(hi) {
    const double range = hi - lo;
    if (observed.empty() || !(range > 0.0)) return;
    const double n = double(observed.size());
    if (rule == TpeBandwidth::kAdaptive) {
      // Width of each kernel is the larger gap to its sorted neighbours
      // (prior mean included), clipped to [range / min(100, n + 1), range].
      std::vector<double> pts = observed;
      if (prior_weight > 0.0) pts.push_back(0.5 * (lo + hi));
      std::vector<std::size_t> order(pts.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pts[i] < pts[j]; });
      std::vector<double> width(pts.size());
      for (std::size_t k = 0; k < order.size(); ++k) {
        const double x = pts[order[k]];
        const double left = k > 0 ? x - pts[order[k - 1]] : x - lo;
        const double right = k + 1 < order.size() ? pts[order[k + 1]] - x : hi - x;
        width[order[k]] = std::clamp(std::max(left, right), range / std::min(100.0, n + 1.0), range);
      }
      for (std::size_t k = 0; k < observed.size(); ++k) add(observed[k], width[k], 1.0);
    } else {
      const double bw = std::max(range * 1.06 * std::pow(n, -0.2), range * 0.01);
      for (double c : observed) add(c, bw, 1.0);
    }
    if (prior_weight > 0.0) add(0.5 * (lo + hi), range, prior_weight);
  }

  double density(double x) const {
    const double range = hi_ - lo_;
    if (range <= 0.0) return 1.0;
    if (centers_.empty()) return 1.0 / range;
    if (x < lo_ || x > hi_) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < centers_.size(); ++k) {
      const double z = (x - centers_[k]) / widths_[k];
      sum += weights_[k] * std::exp(-0.5 * z * z) / (widths_[k] * std::sqrt(2.0 * std::numbers::pi) * mass_[k]);
    }
    return sum / total_weight_;
  }

  double sample(Rng& rng) const {
    if (hi_ <= lo_) return lo_;
    if (centers_.empty()) return rng.uniform(lo_, hi_);
    double u = rng.uniform() * total_weight_;
    std::size_t k = 0;
    while (k + 1 < centers_.size() && u >= weights_[k]) u -= weights_[k++];
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double x = rng.normal(centers_[k], widths_[k]);
      if (x >= lo_ && x <= hi_) return x;
    }
    return std::clamp(centers_[k], lo_, hi_);
  }

 private:
  void add(double center, double width, double weight) {
    centers_.push_back(center);
    widths_.push_back(width);
    weights_.push_back(weight);
    mass_.push_back(normal_cdf((hi_ - center) / width) - normal_cdf((lo_ - center) / width));
    total_weight_ += weight;
  }

  double lo_, hi_;
  std::vector<double> centers_, widths_, weights_, mass_;
  double total_weight_ = 0.0;
};

// Add-one smoothed categorical distribution.
class SmoothedCategorical {
 public:
  SmoothedCategorical(const std::vector<double>& observed, std::size_t n_values) : probs_(n_values, 1.0) {
    for (double v : observed) probs_[std::size_t(v)] += 1.0;
    const double total = double(observed.size() + n_values);
    for (auto& p : probs_) p /= total;
  }

  double density(double v) const { return probs_[std::size_t(v)]; }

  double sample(Rng& rng) const {
    double u = rng.uniform();
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      if (u < probs_[k]) return double(k);
      u -= probs_[k];
    }
    return double(probs_.size() - 1);
  }

 private:
  std::vector<double> probs_;
};

}  // namespace detail

// Suggests the next configuration. History is split at the gamma quantile of
// the objective (maximized); per dimension, l(x) is fit on the good trials and
// g(x) on the rest; the candidate drawn from l maximizing prod l/g wins.
inline Assignment tpe_suggest(std::span<const TrialRecord> history, const SearchSpace& space, Rng& rng,
                              const TpeOptions& opt = {}) {
  std::vector<const TrialRecord*> usable;
  for (const auto& t : history)
    if (t.usable()) usable.push_back(&t);
  if (usable.empty() || int(usable.size()) < opt.n_startup) return sample_random(space, rng);

  // Internally a loss: lower is better.
  std::stable_sort(usable.begin(), usable.end(),
                   [](const TrialRecord* a, const TrialRecord* b) { return -*a->objective < -*b->objective; });
  const auto n_good =
      std::max<std::size_t>(1, std::size_t(std::ceil(opt.gamma * double(usable.size()))));

  using Model = std::variant<detail::TruncatedKde, detail::SmoothedCategorical>;
  struct Dim {
    Model good, bad;
    bool integer = false;
    double lo = 0.0, hi = 0.0;
  };
  std::vector<Dim> dims;
  dims.reserve(space.size());
  for (std::size_t d = 0; d < space.size(); ++d) {
    std::vector<double> good, bad;
    for (std::size_t k = 0; k < usable.size(); ++k) (k < n_good ? good : bad).push_back(usable[k]->config.values[d]);
    const auto& kind = space.params[d].kind;
    if (const auto* c = std::get_if<Choice>(&kind)) {
      dims.push_back({detail::SmoothedCategorical(good, c->values.size()),
                      detail::SmoothedCategorical(bad, c->values.size())});
    } else {
      const bool integer = std::holds_alternative<IntRange>(kind);
      const double lo = integer ? double(std::get<IntRange>(kind).lo) : std::get<UniformFloat>(kind).lo;
      const double hi = integer ? double(std::get<IntRange>(kind).hi) : std::get<UniformFloat>(kind).hi;
      dims.push_back({detail::TruncatedKde(good, lo, hi, opt.prior_weight, opt.bandwidth),
                      detail::TruncatedKde(bad, lo, hi, opt.prior_weight, opt.bandwidth), integer, lo, hi});
    }
  }

  Assignment best;
  double best_score = -std::numeric_limits<double>::infinity();
  constexpr double kTiny = 1e-300;
  for (int c = 0; c < std::max(1, opt.n_candidates); ++c) {
    Assignment cand;
    double score = 0.0;
    for (const auto& dim : dims) {
      double x = std::visit([&](const auto& m) { return m.sample(rng); }, dim.good);
      if (dim.integer) x = std::clamp(std::round(x), dim.lo, dim.hi);
      const double l = std::visit([&](const auto& m) { return m.density(x); }, dim.good);
      const double g = std::visit([&](const auto& m) { return m.density(x); }, dim.bad);
      score += std::log(std::max(l, kTiny)) - std::log(std::max(g, kTiny));
      cand.values.push_back(x);
    }
    if (score > best_score || best.values.empty()) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Search driver

struct TrialOutcome {
  double objective = 0.0;
  int epochs_run = 0;
  bool pruned = false;
};

// Evaluates one configuration; exceptions mark the trial failed.
using Objective = std::function<TrialOutcome(const Assignment& config, int trial_id)>;

struct SearchOptions {
  int n_init = 10;
  int n_trials = 100;  // total, including the n_init random trials
  std::uint64_t seed = 0;
  TpeOptions tpe;
  std::optional<std::filesystem::path> log_path;
  // Stops after this many new trials in this call (resume testing, budgets).
  std::optional<int> max_new_trials;
};

struct SearchResult {
  std::vector<TrialRecord> trials;
  std::optional<std::size_t> best;  // index into trials
  int resumed_from = 0;
};

inline std::optional<std::size_t> best_trial(std::span<const TrialRecord> trials) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].usable() && (!best || *trials[i].objective > *trials[*best].objective)) best = i;
  return best;
}

// Trial t uses an RNG stream derived from (seed, t) and sees the full history
// of trials 0..t-1, so a resumed search replays an uninterrupted one.
inline SearchResult run_search(const SearchSpace& space, const Objective& objective, const SearchOptions& opt) {
  space.validate();
  if (opt.n_trials < 1) throw ConfigError("smbo.n_trials", "must be at least 1");
  if (opt.n_init < 0) throw ConfigError("smbo.n_init", "must be non-negative");
  SearchResult res;
  if (opt.log_path && std::filesystem::exists(*opt.log_path)) res.trials = read_trial_log(*opt.log_path, space);
  res.resumed_from = int(res.trials.size());

  std::ofstream log;
  if (opt.log_path) {
    log.open(*opt.log_path, std::ios::app);
    if (!log) throw PersistenceError("cannot append to trial log '" + opt.log_path->string() + "'");
  }
  TpeOptions tpe = opt.tpe;
  tpe.n_startup = std::max(tpe.n_startup, opt.n_init);

  int started = 0;
  for (int t = int(res.trials.size()); t < opt.n_trials; ++t) {
    if (opt.max_new_trials && started >= *opt.max_new_trials) break;
    ++started;
    Rng rng = Rng::stream(opt.seed, {std::uint64_t(t)});
    TrialRecord rec;
    rec.trial_id = t;
    if (t < opt.n_init) {
      rec.sampler = "random";
      rec.config = sample_random(space, rng);
    } else {
      rec.sampler = "tpe";
      rec.config = tpe_suggest(res.trials, space, rng, tpe);
    }
    try {
      const TrialOutcome out = objective(rec.config, t);
      rec.objective = out.objective;
      rec.epochs_run = out.epochs_run;
      rec.status = out.pruned ? TrialStatus::kPruned : TrialStatus::kCompleted;
    } catch (const std::exception& e) {
      rec.status = TrialStatus::kFailed;
      rec.error = e.what();
    }
    if (log.is_open()) log << to_json(space, rec).dump() << "\n" << std::flush;
    res.trials.push_back(std::move(rec));
  }
  res.best = best_trial(res.trials);
  return res;
}

// Separable toy problem on [0,1]^2 with its maximum 0 at (0.7, 0.3).
inline SearchSpace quadratic_toy_space() { return {{{"x", UniformFloat{0.0, 1.0}}, {"y", UniformFloat{0.0, 1.0}}}}; }

inline double quadratic_toy_objective(const Assignment& a) {
  const double dx = a.values.at(0) - 0.7;
  const double dy = a.values.at(1) - 0.3;
  return -(dx * dx + dy * dy);
}

}  // namespace lbar
