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
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recdiff/error.hpp"
#include "recdiff/tensor.hpp"

namespace recdiff {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Binary user-item interactions r(u, v) = 1.
struct InteractionMatrix {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<Edge> pairs;  // (user, item)
};

/// Binary user-user relations. Stored symmetrically: (a, b) present iff (b, a) present.
struct SocialMatrix {
  std::size_t num_users = 0;
  std::vector<Edge> edges;

  /// Number of undirected ties (each stored twice).
  std::size_t num_undirected() const { return edges.size() / 2; }
};

/// Sorts and removes duplicate pairs in place.
inline void collapse_duplicates(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

/// Builds a SocialMatrix from possibly directed, possibly duplicated ties.
/// Every tie is stored in both directions; self-loops are rejected.
inline SocialMatrix make_social(std::size_t num_users, std::span<const Edge> ties) {
  SocialMatrix sm;
  sm.num_users = num_users;
  sm.edges.reserve(ties.size() * 2);
  for (auto [a, b] : ties) {
    if (a >= num_users || b >= num_users) {
      throw DataError("social tie (" + std::to_string(a) + ", " + std::to_string(b) +
                      ") out of range for " + std::to_string(num_users) + " users");
    }
    if (a == b) throw DataError("self-loop on user " + std::to_string(a));
    sm.edges.emplace_back(a, b);
    sm.edges.emplace_back(b, a);
  }
  collapse_duplicates(sm.edges);
  return sm;
}

/// Builds a validated, duplicate-free InteractionMatrix.
inline InteractionMatrix make_interactions(std::size_t num_users, std::size_t num_items,
                                           std::vector<Edge> pairs) {
  for (auto [u, v] : pairs) {
    if (u >= num_users || v >= num_items) {
      throw DataError("interaction (" + std::to_string(u) + ", " + std::to_string(v) +
                      ") out of range for " + std::to_string(num_users) + " users x " +
                      std::to_string(num_items) + " items");
    }
  }
  collapse_duplicates(pairs);
  return InteractionMatrix{num_users, num_items, std::move(pairs)};
}

/// Symmetric CSR adjacency with D^-1/2 A D^-1/2 weights.
struct SparseGraph {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<NodeId> col_indices;
  std::vector<double> norm_values;
  std::vector<std::size_t> degree;

  std::size_t num_entries() const { return col_indices.size(); }
};

namespace detail {

// `directed` must already hold both directions of every undirected edge.
inline SparseGraph csr_from_directed(std::size_t num_nodes, std::vector<Edge> directed) {
  collapse_duplicates(directed);
  SparseGraph g;
  g.num_nodes = num_nodes;
  g.degree.assign(num_nodes, 0);
  for (auto [a, b] : directed) ++g.degree[a];
  g.row_offsets.assign(num_nodes + 1, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) g.row_offsets[i + 1] = g.row_offsets[i] + g.degree[i];
  g.col_indices.reserve(directed.size());
  g.norm_values.reserve(directed.size());
  for (auto [a, b] : directed) {
    g.col_indices.push_back(b);
    g.norm_values.push_back(1.0 / std::sqrt(static_cast<double>(g.degree[a]) *
                                            static_cast<double>(g.degree[b])));
  }
  return g;
}

}  // namespace detail

/// Collaborative graph over |U| + |V| nodes; item j lives at node |U| + j.
inline SparseGraph build_bipartite(const InteractionMatrix& im) {
  const std::size_t n = im.num_users + im.num_items;
  std::vector<Edge> directed;
  directed.reserve(im.pairs.size() * 2);
  for (auto [u, v] : im.pairs) {
    if (u >= im.num_users || v >= im.num_items) {
      throw DataError("interaction (" + std::to_string(u) + ", " + std::to_string(v) +
                      ") out of range");
    }
    const auto item_node = static_cast<NodeId>(im.num_users + v);
    directed.emplace_back(u, item_node);
    directed.emplace_back(item_node, u);
  }
  return detail::csr_from_directed(n, std::move(directed));
}

/// Social graph over |U| nodes. Edges are symmetrized on the way in.
inline SparseGraph build_social(const SocialMatrix& sm) {
  std::vector<Edge> directed;
  directed.reserve(sm.edges.size() * 2);
  for (auto [a, b] : sm.edges) {
    if (a >= sm.num_users || b >= sm.num_users) {
      throw DataError("social edge (" + std::to_string(a) + ", " + std::to_string(b) +
                      ") out of range");
    }
    if (a == b) throw DataError("self-loop on user " + std::to_string(a));
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  return detail::csr_from_directed(sm.num_users, std::move(directed));
}

/// out = A_norm * in, with `in` and `out` row-major [num_nodes x cols].
/// Rows are summed in ascending column order.
template <class T>
void spmm(const SparseGraph& g, std::span<const T> in, std::span<T> out, std::size_t cols) {
  if (in.size() != g.num_nodes * cols || out.size() != g.num_nodes * cols) {
    throw ShapeError("spmm: dense operand has " + std::to_string(in.size()) +
                     " values, graph expects " + std::to_string(g.num_nodes) + " rows x " +
                     std::to_string(cols));
  }
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    T* dst = out.data() + i * cols;
    std::fill(dst, dst + cols, T(0));
    for (std::size_t k = g.row_offsets[i]; k < g.row_offsets[i + 1]; ++k) {
      const T w = static_cast<T>(g.norm_values[k]);
      const T* src = in.data() + static_cast<std::size_t>(g.col_indices[k]) * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += w * src[c];
    }
  }
}

/// Propagates `dense` one hop over the normalized operator.
template <class T>
Tensor<T> spmv(const SparseGraph& g, const Tensor<T>& dense) {
  if (dense.rows != g.num_nodes) {
    throw ShapeError("spmv: " + std::to_string(dense.rows) + " rows for a graph of " +
                     std::to_string(g.num_nodes) + " nodes");
  }
  Tensor<T> out(dense.rows, dense.cols);
  spmm<T>(g, dense.values, out.values, dense.cols);
  return out;
}

}  // namespace recdiff
