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

#include "recdiff/error.hpp"

namespace recdiff {

/// Dense row-major matrix with an optional gradient buffer of the same shape.
template <class T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;
  std::vector<T> grad;  // empty when absent
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, bool trainable = false)
      : rows(r), cols(c), values(r * c, T(0)), requires_grad(trainable) {}
  Tensor(std::size_t r, std::size_t c, std::vector<T> v, bool trainable = false)
      : rows(r), cols(c), values(std::move(v)), requires_grad(trainable) {
    if (values.size() != r * c) {
      throw ShapeError("tensor of shape " + std::to_string(r) + "x" + std::to_string(c) +
                       " given " + std::to_string(values.size()) + " values");
    }
  }

  std::size_t size() const { return values.size(); }
  bool has_grad() const { return !grad.empty(); }
  T& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  /// Converts the values to another scalar type; the gradient is dropped.
  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols, requires_grad);
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
    return out;
  }
};

}  // namespace recdiff
