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

// Retrieval ranking and metrics (R@k, mAP@10) for one relevant candidate per
// query.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace lbar {

// 1-based rank of targets[q] in row q of `scores` (higher is better). Equal
// scores are ordered by candidate index, so a tied candidate with a lower
// index ranks ahead of the target.
inline std::vector<int> rank_targets(const Eigen::MatrixXd& scores, std::span<const int> targets) {
  if (std::size_t(scores.rows()) != targets.size())
    throw std::invalid_argument("one target per query row required");
  std::vector<int> ranks(targets.size());
  for (Eigen::Index q = 0; q < scores.rows(); ++q) {
    const int target = targets[std::size_t(q)];
    if (target < 0 || target >= scores.cols()) throw std::invalid_argument("target index outside candidate range");
    const double s = scores(q, target);
    int ahead = 0;
    for (Eigen::Index m = 0; m < scores.cols(); ++m) {
      const double v = scores(q, m);
      if (v > s || (v == s && m < target)) ++ahead;
    }
    ranks[std::size_t(q)] = ahead + 1;
  }
  return ranks;
}

inline double recall_at_k(std::span<const int> ranks, int k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (int r : ranks) hits += r <= k;
  return double(hits) / double(ranks.size());
}

// With a single relevant item, average precision truncated at 10 is 1/rank
// inside the top 10 and 0 otherwise.
inline double map_at_10(std::span<const int> ranks) {
  if (ranks.empty()) return 0.0;
  double sum = 0.0;
  for (int r : ranks)
    if (r <= 10) sum += 1.0 / r;
  return sum / double(ranks.size());
}

struct RetrievalMetrics {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double map10 = 0.0;
  std::size_t n_queries = 0;
};

inline RetrievalMetrics retrieval_metrics(std::span<const int> ranks) {
  return {recall_at_k(ranks, 1), recall_at_k(ranks, 5), recall_at_k(ranks, 10), map_at_10(ranks), ranks.size()};
}

inline nlohmann::json to_json(const RetrievalMetrics& m) {
  return {{"R@1", m.r1}, {"R@5", m.r5}, {"R@10", m.r10}, {"mAP@10", m.map10}, {"n_queries", m.n_queries}};
}

// Aligned text table, one row per labelled result, values in percent.
inline std::string metrics_table(std::span<const std::pair<std::string, RetrievalMetrics>> rows) {
  std::size_t label_w = 0;
  for (const auto& [label, _] : rows) label_w = std::max(label_w, label.size());
  std::ostringstream os;
  os << std::left << std::setw(int(label_w)) << "" << std::right;
  for (const char* h : {"R@1", "R@5", "R@10", "mAP@10"}) os << "  " << std::setw(8) << h;
  os << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& [label, m] : rows) {
    os << std::left << std::setw(int(label_w)) << label << std::right;
    for (double v : {m.r1, m.r5, m.r10, m.map10}) os << "  " << std::setw(8) << 100.0 * v;
    os << "\n";
  }
  return os.str();
}

}  // namespace lbar
