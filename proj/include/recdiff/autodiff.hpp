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

// Reverse-mode differentiation over dense 2-D tensors.
//
// A Tape records every operation in execution order, so the node list is
// already topologically sorted and backward() is a single reverse sweep.
// Only nodes that depend on a trainable leaf get a gradient buffer.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recdiff/error.hpp"
#include "recdiff/graph.hpp"
#include "recdiff/tensor.hpp"

namespace recdiff::ad {

template <class T>
class Tape;

/// Handle to a node on a Tape.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  std::size_t rows() const { return tape_->node(id_).rows; }
  std::size_t cols() const { return tape_->node(id_).cols; }
  std::span<const T> value() const { return tape_->node(id_).value; }
  T item() const {
    if (rows() != 1 || cols() != 1) throw ShapeError("item() on a non-scalar");
    return value()[0];
  }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> value;
    std::vector<T> grad;
    bool needs_grad = false;
    Backward backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a copy of `t`; it is differentiable iff t.requires_grad.
  Var<T> leaf(const Tensor<T>& t) { return push(t.rows, t.cols, t.values, t.requires_grad, {}); }

  Var<T> constant(std::size_t rows, std::size_t cols, std::vector<T> values) {
    if (values.size() != rows * cols) throw ShapeError("constant: value count mismatch");
    return push(rows, cols, std::move(values), false, {});
  }

  Var<T> push(std::size_t rows, std::size_t cols, std::vector<T> value, bool needs_grad,
              Backward backward) {
    nodes_.push_back(Node{rows, cols, std::move(value), {}, needs_grad, std::move(backward)});
    return Var<T>(this, nodes_.size() - 1);
  }

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of node `id`, zero-initialized on first use.
  std::vector<T>& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  /// Populates d(loss)/d(node) for every node that depends on a trainable leaf.
  void backward(Var<T> loss) {
    if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw ShapeError("backward: loss must be scalar, got " + std::to_string(loss.rows()) + "x" +
                       std::to_string(loss.cols()));
    }
    for (auto& n : nodes_) n.grad.clear();
    if (!nodes_[loss.id()].needs_grad) return;
    grad_buffer(loss.id())[0] = T(1);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.needs_grad && !n.grad.empty() && n.backward) n.backward(*this, id);
    }
  }

  /// Gradient of the last backward pass w.r.t. `v`; zeros if `v` was unreachable.
  std::vector<T> grad(Var<T> v) const {
    const Node& n = nodes_[v.id()];
    return n.grad.empty() ? std::vector<T>(n.value.size(), T(0)) : n.grad;
  }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

template <class T>
void require_same_tape(const Var<T>& a, const Var<T>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands recorded on different tapes");
}

template <class T>
bool needs(const Var<T>& v) {
  return v.tape().node(v.id()).needs_grad;
}

}  // namespace detail

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: " + std::to_string(m) + "x" + std::to_string(k) + " by " +
                     std::to_string(b.rows()) + "x" + std::to_string(n));
  }
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T x = av[i * k + p];
      const T* brow = bv.data() + p * n;
      T* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(m, n, std::move(out), detail::needs(a) || detail::needs(b),
                       [ia, ib, m, k, n](Tape<T>& t, std::size_t self) {
                         const auto& g = t.node(self).grad;
                         if (t.node(ia).needs_grad) {
                           auto& ga = t.grad_buffer(ia);
                           const auto& bv = t.node(ib).value;
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) {
                               T acc = T(0);
                               for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                               ga[i * k + p] += acc;
                             }
                         }
                         if (t.node(ib).needs_grad) {
                           auto& gb = t.grad_buffer(ib);
                           const auto& av = t.node(ia).value;
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t p = 0; p < k; ++p) {
                               const T x = av[i * k + p];
                               for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += x * g[i * n + j];
                             }
                         }
                       });
}

namespace detail {

// Elementwise binary op with local partials d(out)/d(a), d(out)/d(b).
template <class T, class F, class Da, class Db>
Var<T> binary(Var<T> a, Var<T> b, const char* name, F f, Da da, Db db) {
  require_same_tape(a, b);
  require_same_shape(a, b, name);
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(a.rows(), a.cols(), std::move(out), needs(a) || needs(b),
                       [ia, ib, da, db](Tape<T>& t, std::size_t self) {
                         const auto& g = t.node(self).grad;
                         const auto& x = t.node(ia).value;
                         const auto& y = t.node(ib).value;
                         if (t.node(ia).needs_grad) {
                           auto& ga = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[i]);
                         }
                         if (t.node(ib).needs_grad) {
                           auto& gb = t.grad_buffer(ib);
                           for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(x[i], y[i]);
                         }
                       });
}

// Elementwise unary op; `d` receives (input, output).
template <class T, class F, class D>
Var<T> unary(Var<T> a, F f, D d) {
  auto av = a.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  const std::size_t ia = a.id();
  return a.tape().push(a.rows(), a.cols(), std::move(out), needs(a),
                       [ia, d](Tape<T>& t, std::size_t self) {
                         const auto& n = t.node(self);
                         const auto& x = t.node(ia).value;
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < n.grad.size(); ++i)
                           ga[i] += n.grad[i] * d(x[i], n.value[i]);
                       });
}

}  // namespace detail

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  return detail::binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return detail::binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

/// Hadamard product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  return detail::binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  return detail::unary(a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <class T>
Var<T> leaky_relu(Var<T> a, T slope) {
  return detail::unary(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

/// log(1 + exp(x)), stable in both tails.
template <class T>
Var<T> softplus(Var<T> a) {
  return detail::unary(
      a, [](T x) { return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x))); },
      [](T x, T) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
      });
}

/// Concatenates along columns: [a | b].
template <class T>
Var<T> concat(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  if (a.rows() != b.rows()) throw ShapeError("concat: row counts differ");
  const std::size_t m = a.rows(), p = a.cols(), q = b.cols(), n = p + q;
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.data() + i * p, p, out.data() + i * n);
    std::copy_n(bv.data() + i * q, q, out.data() + i * n + p);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(m, n, std::move(out), detail::needs(a) || detail::needs(b),
                       [ia, ib, m, p, q, n](Tape<T>& t, std::size_t self) {
                         const auto& g = t.node(self).grad;
                         if (t.node(ia).needs_grad) {
                           auto& ga = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t c = 0; c < p; ++c) ga[i * p + c] += g[i * n + c];
                         }
                         if (t.node(ib).needs_grad) {
                           auto& gb = t.grad_buffer(ib);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t c = 0; c < q; ++c) gb[i * q + c] += g[i * n + p + c];
                         }
                       });
}

/// Adds a 1 x n bias row to every row of a.
template <class T>
Var<T> add_row_bias(Var<T> a, Var<T> bias) {
  detail::require_same_tape(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ShapeError("add_row_bias: bias shape");
  const std::size_t m = a.rows(), n = a.cols();
  auto av = a.value();
  auto bv = bias.value();
  std::vector<T> out(av.begin(), av.end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < n; ++c) out[i * n + c] += bv[c];
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape().push(m, n, std::move(out), detail::needs(a) || detail::needs(bias),
                       [ia, ib, m, n](Tape<T>& t, std::size_t self) {
                         const auto& g = t.node(self).grad;
                         if (t.node(ia).needs_grad) {
                           auto& ga = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         }
                         if (t.node(ib).needs_grad) {
                           auto& gb = t.grad_buffer(ib);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t c = 0; c < n; ++c) gb[c] += g[i * n + c];
                         }
                       });
}

/// Sum of all entries, as a 1x1 tensor.
template <class T>
Var<T> sum(Var<T> a) {
  T acc = T(0);
  for (T x : a.value()) acc += x;
  const std::size_t ia = a.id();
  return a.tape().push(1, 1, {acc}, detail::needs(a), [ia](Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0];
    for (auto& x : t.grad_buffer(ia)) x += g;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

/// Squared Frobenius norm, as a 1x1 tensor.
template <class T>
Var<T> sq_norm(Var<T> a) {
  T acc = T(0);
  for (T x : a.value()) acc += x * x;
  const std::size_t ia = a.id();
  return a.tape().push(1, 1, {acc}, detail::needs(a), [ia](Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0];
    const auto& x = t.node(ia).value;
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += T(2) * g * x[i];
  });
}

/// Per-row sums, m x 1.
template <class T>
Var<T> row_sum(Var<T> a) {
  const std::size_t m = a.rows(), n = a.cols();
  auto av = a.value();
  std::vector<T> out(m, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < n; ++c) out[i] += av[i * n + c];
  const std::size_t ia = a.id();
  return a.tape().push(m, 1, std::move(out), detail::needs(a),
                       [ia, m, n](Tape<T>& t, std::size_t self) {
                         const auto& g = t.node(self).grad;
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t c = 0; c < n; ++c) ga[i * n + c] += g[i];
                       });
}

/// Per-row inner products of two equally shaped tensors, m x 1.
template <class T>
Var<T> row_dot(Var<T> a, Var<T> b) {
  return row_sum(mul(a, b));
}

/// Multiplies row i of `a` by the constant coeffs[i].
template <class T>
Var<T> scale_rows(Var<T> a, std::vector<T> coeffs) {
  const std::size_t m = a.rows(), n = a.cols();
  if (coeffs.size() != m) throw ShapeError("scale_rows: one coefficient per row required");
  auto av = a.value();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < n; ++c) out[i * n + c] = coeffs[i] * av[i * n + c];
  const std::size_t ia = a.id();
  return a.tape().push(m, n, std::move(out), detail::needs(a),
                       [ia, m, n, coeffs = std::move(coeffs)](Tape<T>& t, std::size_t self) {
                         const auto& g = t.node(self).grad;
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t c = 0; c < n; ++c) ga[i * n + c] += coeffs[i] * g[i * n + c];
                       });
}

/// y_i = x_i / max(|x_i|, eps) for every row i.
template <class T>
Var<T> l2_normalize_rows(Var<T> a, T eps) {
  const std::size_t m = a.rows(), n = a.cols();
  auto av = a.value();
  std::vector<T> out(m * n);
  std::vector<T> denom(m);
  for (std::size_t i = 0; i < m; ++i) {
    T ss = T(0);
    for (std::size_t c = 0; c < n; ++c) ss += av[i * n + c] * av[i * n + c];
    denom[i] = std::max(std::sqrt(ss), eps);
    for (std::size_t c = 0; c < n; ++c) out[i * n + c] = av[i * n + c] / denom[i];
  }
  const std::size_t ia = a.id();
  return a.tape().push(
      m, n, std::move(out), detail::needs(a),
      [ia, m, n, eps, denom = std::move(denom)](Tape<T>& t, std::size_t self) {
        const auto& node = t.node(self);
        const auto& g = node.grad;
        const auto& y = node.value;
        auto& ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < m; ++i) {
          const T* gi = g.data() + i * n;
          const T* yi = y.data() + i * n;
          T* out = ga.data() + i * n;
          if (denom[i] > eps) {
            T proj = T(0);
            for (std::size_t c = 0; c < n; ++c) proj += yi[c] * gi[c];
            for (std::size_t c = 0; c < n; ++c) out[c] += (gi[c] - yi[c] * proj) / denom[i];
          } else {
            // Clamped branch: the denominator is the constant eps.
            for (std::size_t c = 0; c < n; ++c) out[c] += gi[c] / eps;
          }
        }
      });
}

/// One propagation hop over a symmetric normalized graph.
template <class T>
Var<T> spmm(const SparseGraph& g, Var<T> a) {
  if (a.rows() != g.num_nodes) {
    throw ShapeError("spmm: " + std::to_string(a.rows()) + " rows for a graph of " +
                     std::to_string(g.num_nodes) + " nodes");
  }
  const std::size_t n = a.cols();
  std::vector<T> out(a.rows() * n);
  recdiff::spmm<T>(g, a.value(), out, n);
  const std::size_t ia = a.id();
  // The operator is symmetric, so the adjoint is the same propagation.
  return a.tape().push(a.rows(), n, std::move(out), detail::needs(a),
                       [ia, n, &g](Tape<T>& t, std::size_t self) {
                         const auto& gout = t.node(self).grad;
                         std::vector<T> back(gout.size());
                         recdiff::spmm<T>(g, std::span<const T>(gout), std::span<T>(back), n);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < back.size(); ++i) ga[i] += back[i];
                       });
}

/// Selects rows of `a` by index (repeats allowed); backward scatter-adds.
template <class T>
Var<T> gather_rows(Var<T> a, std::vector<std::size_t> index) {
  const std::size_t n = a.cols();
  auto av = a.value();
  std::vector<T> out(index.size() * n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " >= " +
                       std::to_string(a.rows()));
    }
    std::copy_n(av.data() + index[i] * n, n, out.data() + i * n);
  }
  const std::size_t ia = a.id();
  const std::size_t m = index.size();
  return a.tape().push(m, n, std::move(out), detail::needs(a),
                       [ia, n, index = std::move(index)](Tape<T>& t, std::size_t self) {
                         const auto& g = t.node(self).grad;
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < index.size(); ++i)
                           for (std::size_t c = 0; c < n; ++c) ga[index[i] * n + c] += g[i * n + c];
                       });
}

}  // namespace recdiff::ad
