// Copyright 2026 The RecDiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "recdiff/graph.hpp"

namespace recdiff {

/// Per-user sorted item lists.
using UserItems = std::vector<std::vector<NodeId>>;

inline bool contains_sorted(std::span<const NodeId> sorted, NodeId x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

/// |top-N ∩ relevant| / |relevant|. `relevant` must be sorted and non-empty.
inline double recall_at_n(std::span<const NodeId> ranked, std::span<const NodeId> relevant, std::size_t n) {
  if (relevant.empty()) throw std::invalid_argument("recall_at_n: empty relevant set");
  const std::size_t k = std::min(n, ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += contains_sorted(relevant, ranked[i]);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// Binary-gain NDCG with discount 1 / log2(rank + 1), ranks from 1.
inline double ndcg_at_n(std::span<const NodeId> ranked, std::span<const NodeId> relevant, std::size_t n) {
  if (relevant.empty()) throw std::invalid_argument("ndcg_at_n: empty relevant set");
  const std::size_t k = std::min(n, ranked.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    if (contains_sorted(relevant, ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(n, relevant.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

/// The `n` best unmasked items by descending score, ties by ascending id.
/// `masks` hold sorted item lists treated as scoring -inf.
template <class T>
std::vector<NodeId> top_n(std::span<const T> scores, std::span<const std::span<const NodeId>> masks, std::size_t n) {
  std::vector<NodeId> candidates;
  candidates.reserve(scores.size());
  for (NodeId i = 0; i < scores.size(); ++i) {
    bool masked = false;
    for (auto m : masks) masked = masked || contains_sorted(m, i);
    if (!masked) candidates.push_back(i);
  }
  const auto better = [&](NodeId a, NodeId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  const std::size_t k = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(), better);
  candidates.resize(k);
  return candidates;
}

}  // namespace recdiff
