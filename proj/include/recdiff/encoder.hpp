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

#include <cstddef>
#include <string>
#include <vector>

#include "recdiff/autodiff.hpp"
#include "recdiff/graph.hpp"
#include "recdiff/optim.hpp"

namespace recdiff {

struct EncoderOptions {
  std::size_t layers = 2;
  bool weight_transform = false;  // multiply each hop by a trainable d x d matrix
  bool normalize = true;          // per-row l2 normalization of layers >= 1
  double eps = 1e-12;
};

/// Tape handles for one encoder: the layer-0 table and optional per-layer weights.
template <class T>
struct EncoderParams {
  ad::Var<T> table;
  std::vector<ad::Var<T>> weights;  // empty unless weight_transform
};

/// Registers `<prefix>.E0` (and `<prefix>.W<l>`) in `store`.
template <class T, class Rng>
void register_encoder(ParamStore<T>& store, const std::string& prefix, std::size_t rows,
                      std::size_t dim, const EncoderOptions& opts, Rng& rng) {
  // Row norms of the layer-0 table stay around 1/sqrt(d) for every width.
  const double gain = 1.0 / std::sqrt(static_cast<double>(dim));
  store.add(prefix + ".E0", xavier_uniform<T>(rows, dim, dim, dim, gain, rng));
  if (opts.weight_transform) {
    for (std::size_t l = 1; l <= opts.layers; ++l)
      store.add(prefix + ".W" + std::to_string(l), xavier_uniform<T>(dim, dim, dim, dim, 1.0, rng));
  }
}

template <class T>
EncoderParams<T> bind_encoder(const ParamBinding<T>& bound, const std::string& prefix,
                              const EncoderOptions& opts) {
  EncoderParams<T> p{bound[prefix + ".E0"], {}};
  if (opts.weight_transform)
    for (std::size_t l = 1; l <= opts.layers; ++l) p.weights.push_back(bound[prefix + ".W" + std::to_string(l)]);
  return p;
}

/// Multi-hop propagation: E_l = h(A_norm E_{l-1} W_l), output sum_{l=0..L} E_l.
template <class T>
ad::Var<T> encode(const SparseGraph& g, ad::Var<T> layer0, const std::vector<ad::Var<T>>& weights,
                  const EncoderOptions& opts) {
  if (layer0.rows() != g.num_nodes) {
    throw ShapeError("encode: " + std::to_string(layer0.rows()) + " embedding rows for " +
                     std::to_string(g.num_nodes) + " graph nodes");
  }
  if (opts.weight_transform && weights.size() != opts.layers) {
    throw ShapeError("encode: expected one weight matrix per layer");
  }
  ad::Var<T> out = layer0;
  ad::Var<T> prev = layer0;
  for (std::size_t l = 0; l < opts.layers; ++l) {
    ad::Var<T> x = ad::spmm(g, prev);
    if (opts.weight_transform) x = ad::matmul(x, weights[l]);
    if (opts.normalize) x = ad::l2_normalize_rows(x, static_cast<T>(opts.eps));
    out = ad::add(out, x);
    prev = x;
  }
  return out;
}

/// E^r over |U| + |V| nodes.
template <class T>
ad::Var<T> encode_interaction(const SparseGraph& g_r, const EncoderParams<T>& p,
                              const EncoderOptions& opts) {
  return encode(g_r, p.table, p.weights, opts);
}

/// E^s over |U| nodes.
template <class T>
ad::Var<T> encode_social(const SparseGraph& g_s, const EncoderParams<T>& p,
                         const EncoderOptions& opts) {
  return encode(g_s, p.table, p.weights, opts);
}

}  // namespace recdiff
