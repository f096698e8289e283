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

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "recdiff/autodiff.hpp"
#include "recdiff/error.hpp"
#include "recdiff/tensor.hpp"

namespace recdiff {

/// Named trainable tensors in registration order.
template <class T>
class ParamStore {
 public:
  Tensor<T>& add(std::string name, Tensor<T> t) {
    if (find(name)) throw std::invalid_argument("duplicate parameter " + name);
    t.requires_grad = true;
    entries_.emplace_back(std::move(name), std::move(t));
    return entries_.back().second;
  }

  Tensor<T>* find(const std::string& name) {
    for (auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }
  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }
  Tensor<T>& at(const std::string& name) {
    if (auto* t = find(name)) return *t;
    throw std::out_of_range("no parameter named " + name);
  }
  const Tensor<T>& at(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw std::out_of_range("no parameter named " + name);
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  void zero_grad() {
    for (auto& [n, t] : entries_) t.grad.assign(t.size(), T(0));
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

/// Records every parameter of a store as a leaf on `tape` and copies the
/// gradients back after backward().
template <class T>
class ParamBinding {
 public:
  ParamBinding(ad::Tape<T>& tape, ParamStore<T>& store, bool track_grads = true) : tape_(tape), store_(store) {
    for (auto& [name, t] : store_)
      vars_.emplace_back(name, track_grads ? tape_.leaf(t) : tape_.constant(t.rows, t.cols, t.values));
  }

  ad::Var<T> operator[](const std::string& name) const {
    for (const auto& [n, v] : vars_)
      if (n == name) return v;
    throw std::out_of_range("no bound parameter named " + name);
  }

  void export_grads() {
    std::size_t i = 0;
    for (auto& [name, t] : store_) t.grad = tape_.grad(vars_[i++].second);
  }

 private:
  ad::Tape<T>& tape_;
  ParamStore<T>& store_;
  std::vector<std::pair<std::string, ad::Var<T>>> vars_;
};

/// Xavier-uniform initialization, U(-a, a) with a = sqrt(6 / (fan_in + fan_out)) * gain.
template <class T, class Rng>
Tensor<T> xavier_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                         std::size_t fan_out, double gain, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)) * gain;
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(rows, cols, true);
  for (auto& x : t.values) x = static_cast<T>(dist(rng));
  return t;
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled, applied as p -= lr * wd * p
};

template <class T>
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  long long step = 0;

  explicit AdamState(AdamOptions opts = {}) : options(opts) {}
};

/// One Adam step with bias correction and decoupled weight decay.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
  if (state.first_moment.empty()) {
    for (const auto& [name, t] : params) {
      state.first_moment.emplace_back(t.size(), T(0));
      state.second_moment.emplace_back(t.size(), T(0));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameter store");
  }
  for (const auto& [name, t] : params) {
    if (t.grad.size() != t.size()) throw std::invalid_argument("adam_step: missing grad for " + name);
  }
  ++state.step;
  const auto& o = state.options;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (auto& [name, t] : params) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    ++k;
    if (m.size() != t.size()) throw ShapeError("adam_step: moment shape mismatch for " + name);
    const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2);
    const T step_size = static_cast<T>(o.lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(o.epsilon);
    const T decay = static_cast<T>(o.lr * o.weight_decay);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const T g = t.grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      t.values[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + eps) + decay * t.values[i];
    }
  }
}

}  // namespace recdiff
