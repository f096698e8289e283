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

// Hidden-space Gaussian diffusion over social embeddings.
//
// Step indices follow the usual convention: t = 1..T, with alpha_bar(0) = 1.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "recdiff/autodiff.hpp"
#include "recdiff/error.hpp"
#include "recdiff/optim.hpp"
#include "recdiff/tensor.hpp"

namespace recdiff {

struct NoiseSchedule {
  std::size_t steps = 0;         // T
  std::vector<double> s_seq;     // s_0 = 1, s_1 = tau*s_max, ..., s_T = tau*s_min
  std::vector<double> beta;      // beta[t-1] = 1 - s_t / s_{t-1}
  std::vector<double> alpha;     // 1 - beta
  std::vector<double> alpha_bar; // cumulative product of alpha
  double s_max = 0.0;
  double s_min = 0.0;
  double tau = 1.0;

  double beta_at(std::size_t t) const { return beta.at(t - 1); }
  double alpha_at(std::size_t t) const { return alpha.at(t - 1); }
  double alpha_bar_at(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }

  void check_step(std::size_t t) const {
    if (t < 1 || t > steps) {
      throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [1, " +
                              std::to_string(steps) + "]");
    }
  }
};

/// Linear interpolation schedule between tau*s_max and tau*s_min.
inline NoiseSchedule build_schedule(std::size_t steps, double s_max, double s_min, double tau) {
  if (steps < 1) throw ConfigError("diffusion steps must be >= 1");
  const double hi = tau * s_max;
  const double lo = tau * s_min;
  if (!(lo > 0.0) || !(lo <= hi) || !(hi < 1.0)) {
    throw ConfigError("noise schedule needs 0 < tau*s_min <= tau*s_max < 1 (got " +
                      std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.s_max = s_max;
  s.s_min = s_min;
  s.tau = tau;
  s.s_seq.resize(steps + 1);
  s.s_seq[0] = 1.0;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    s.s_seq[t] = hi + (lo - hi) * frac;
  }
  double running = 1.0;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double b = 1.0 - s.s_seq[t] / s.s_seq[t - 1];
    if (!(b > 0.0 && b < 1.0)) {
      throw ConfigError("noise schedule produces beta_" + std::to_string(t) + " = " +
                        std::to_string(b) + " outside (0, 1)");
    }
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    running *= 1.0 - b;
    s.alpha_bar.push_back(running);
  }
  return s;
}

/// e_t = sqrt(abar_t) e_0 + sqrt(1 - abar_t) noise, with a step per row.
template <class T>
Tensor<T> forward_closed_form(const Tensor<T>& e0, const std::vector<std::size_t>& steps,
                              const Tensor<T>& noise, const NoiseSchedule& sched) {
  if (steps.size() != e0.rows || noise.rows != e0.rows || noise.cols != e0.cols) {
    throw ShapeError("forward_closed_form: inconsistent batch shapes");
  }
  Tensor<T> out(e0.rows, e0.cols);
  for (std::size_t i = 0; i < e0.rows; ++i) {
    sched.check_step(steps[i]);
    const T a = static_cast<T>(std::sqrt(sched.alpha_bar_at(steps[i])));
    const T b = static_cast<T>(std::sqrt(1.0 - sched.alpha_bar_at(steps[i])));
    for (std::size_t c = 0; c < e0.cols; ++c) out.at(i, c) = a * e0.at(i, c) + b * noise.at(i, c);
  }
  return out;
}

/// Differentiable version of forward_closed_form; `noise` is a constant.
template <class T>
ad::Var<T> forward_closed_form(ad::Var<T> e0, const std::vector<std::size_t>& steps,
                               const Tensor<T>& noise, const NoiseSchedule& sched) {
  if (steps.size() != e0.rows() || noise.rows != e0.rows() || noise.cols != e0.cols()) {
    throw ShapeError("forward_closed_form: inconsistent batch shapes");
  }
  std::vector<T> keep(steps.size()), mix(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    sched.check_step(steps[i]);
    keep[i] = static_cast<T>(std::sqrt(sched.alpha_bar_at(steps[i])));
    mix[i] = static_cast<T>(std::sqrt(1.0 - sched.alpha_bar_at(steps[i])));
  }
  auto& tape = e0.tape();
  auto n = tape.constant(noise.rows, noise.cols, noise.values);
  return ad::add(ad::scale_rows(e0, std::move(keep)), ad::scale_rows(n, std::move(mix)));
}

/// Applies q(e_t | e_{t-1}) step by step using noise_seq[k] for step k+1.
template <class T>
Tensor<T> forward_iterative(const Tensor<T>& e0, std::size_t t, const std::vector<Tensor<T>>& noise_seq,
                            const NoiseSchedule& sched) {
  sched.check_step(t);
  if (noise_seq.size() < t) throw ShapeError("forward_iterative: need one noise draw per step");
  Tensor<T> cur = e0;
  for (std::size_t k = 1; k <= t; ++k) {
    const auto& n = noise_seq[k - 1];
    if (n.rows != e0.rows || n.cols != e0.cols) throw ShapeError("forward_iterative: noise shape");
    const double keep = std::sqrt(sched.alpha_at(k));
    const double mix = std::sqrt(sched.beta_at(k));
    for (std::size_t i = 0; i < cur.size(); ++i)
      cur.values[i] = static_cast<T>(keep * cur.values[i] + mix * n.values[i]);
  }
  return cur;
}

enum class Activation { leaky_relu, relu, tanh, identity };

inline Activation parse_activation(const std::string& s) {
  if (s == "leaky_relu" || s == "leaky-relu") return Activation::leaky_relu;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

template <class T>
ad::Var<T> activate(ad::Var<T> x, Activation kind, double slope) {
  switch (kind) {
    case Activation::leaky_relu: return ad::leaky_relu(x, static_cast<T>(slope));
    case Activation::relu: return ad::leaky_relu(x, T(0));
    case Activation::tanh:
      return ad::detail::unary(
          x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
    case Activation::identity: return x;
  }
  return x;
}

struct DenoiserOptions {
  std::size_t dim = 64;          // d
  std::size_t time_dim = 16;     // d'
  std::size_t hidden = 64;       // H
  Activation activation = Activation::leaky_relu;
  double slope = 0.2;
  bool sinusoidal_time = false;  // fixed sinusoidal h_t instead of a learned table
};

/// Sinusoidal step embedding, (T+1) x time_dim.
template <class T>
Tensor<T> sinusoidal_table(std::size_t steps, std::size_t time_dim) {
  Tensor<T> out(steps + 1, time_dim);
  const std::size_t half = (time_dim + 1) / 2;
  for (std::size_t t = 0; t <= steps; ++t)
    for (std::size_t k = 0; k < time_dim; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k % half) / static_cast<double>(half));
      const double arg = static_cast<double>(t) * freq;
      out.at(t, k) = static_cast<T>(k < half ? std::sin(arg) : std::cos(arg));
    }
  return out;
}

/// Registers den.time_emb, den.W1, den.b1, den.W2, den.b2.
template <class T, class Rng>
void register_denoiser(ParamStore<T>& store, std::size_t steps, const DenoiserOptions& o, Rng& rng) {
  if (!o.sinusoidal_time) {
    const double gain = 1.0 / std::sqrt(static_cast<double>(o.time_dim));
    store.add("den.time_emb", xavier_uniform<T>(steps + 1, o.time_dim, o.time_dim, o.time_dim, gain, rng));
  }
  const std::size_t in = o.dim + o.time_dim;
  store.add("den.W1", xavier_uniform<T>(in, o.hidden, in, o.hidden, 1.0, rng));
  store.add("den.b1", Tensor<T>(1, o.hidden));
  store.add("den.W2", xavier_uniform<T>(o.hidden, o.dim, o.hidden, o.dim, 1.0, rng));
  store.add("den.b2", Tensor<T>(1, o.dim));
}

/// Tape view of the time-conditioned two-layer denoiser.
template <class T>
struct DenoiserNet {
  ad::Var<T> time_emb;  // learned table; unused when sinusoidal
  ad::Var<T> w1, b1, w2, b2;
  DenoiserOptions options;
  std::size_t steps = 0;
};

template <class T>
DenoiserNet<T> bind_denoiser(const ParamBinding<T>& bound, std::size_t steps, const DenoiserOptions& o) {
  DenoiserNet<T> net;
  if (!o.sinusoidal_time) net.time_emb = bound["den.time_emb"];
  net.w1 = bound["den.W1"];
  net.b1 = bound["den.b1"];
  net.w2 = bound["den.W2"];
  net.b2 = bound["den.b2"];
  net.options = o;
  net.steps = steps;
  return net;
}

/// e0_hat = W2 act(W1 [e_t | h_t] + b1) + b2.
template <class T>
ad::Var<T> predict_e0(const DenoiserNet<T>& net, ad::Var<T> et, const std::vector<std::size_t>& steps) {
  if (steps.size() != et.rows()) throw ShapeError("predict_e0: one step per row required");
  if (et.cols() != net.options.dim) throw ShapeError("predict_e0: embedding width mismatch");
  for (auto t : steps)
    if (t < 1 || t > net.steps) throw std::out_of_range("predict_e0: step " + std::to_string(t));
  auto& tape = et.tape();
  ad::Var<T> h;
  if (net.options.sinusoidal_time) {
    const auto table = sinusoidal_table<T>(net.steps, net.options.time_dim);
    std::vector<T> rows(steps.size() * net.options.time_dim);
    for (std::size_t i = 0; i < steps.size(); ++i)
      for (std::size_t k = 0; k < net.options.time_dim; ++k) rows[i * net.options.time_dim + k] = table.at(steps[i], k);
    h = tape.constant(steps.size(), net.options.time_dim, std::move(rows));
  } else {
    h = ad::gather_rows(net.time_emb, std::vector<std::size_t>(steps.begin(), steps.end()));
  }
  auto hidden = ad::add_row_bias(ad::matmul(ad::concat(et, h), net.w1), net.b1);
  hidden = activate(hidden, net.options.activation, net.options.slope);
  return ad::add_row_bias(ad::matmul(hidden, net.w2), net.b2);
}

/// Weight of the denoising-matching term at step t >= 2.
inline double denoise_weight(const NoiseSchedule& sched, std::size_t t) {
  sched.check_step(t);
  if (t < 2) throw std::out_of_range("denoise_weight is defined for t >= 2");
  const double prev = sched.alpha_bar_at(t - 1);
  const double cur = sched.alpha_bar_at(t);
  return 0.5 * (prev / (1.0 - prev) - cur / (1.0 - cur));
}

enum class DiffusionLossMode {
  elbo,        // weighted matching term for t >= 2, reconstruction for t = 1
  recon_only,  // unweighted squared error at every sampled step
};

/// Batch mean of w_i * |e0_hat_i - e0_i|^2 with w_i chosen by `mode`.
template <class T>
ad::Var<T> diffusion_loss(ad::Var<T> e0, ad::Var<T> e0_hat, const std::vector<std::size_t>& steps,
                          const NoiseSchedule& sched, DiffusionLossMode mode) {
  if (steps.size() != e0.rows()) throw ShapeError("diffusion_loss: one step per row required");
  std::vector<T> weights(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    sched.check_step(steps[i]);
    weights[i] = (mode == DiffusionLossMode::recon_only || steps[i] == 1)
                     ? T(1)
                     : static_cast<T>(denoise_weight(sched, steps[i]));
  }
  auto sq = ad::row_sum(ad::mul(ad::sub(e0_hat, e0), ad::sub(e0_hat, e0)));
  return ad::mean(ad::scale_rows(sq, std::move(weights)));
}

/// Denoising-matching term L_t; rows at t = 1 fall back to the reconstruction term.
template <class T>
ad::Var<T> loss_denoise_matching(ad::Var<T> e0, ad::Var<T> e0_hat, const std::vector<std::size_t>& steps,
                                 const NoiseSchedule& sched) {
  return diffusion_loss(e0, e0_hat, steps, sched, DiffusionLossMode::elbo);
}

/// Reconstruction term: batch mean of |e0_hat - e0|^2.
template <class T>
ad::Var<T> loss_reconstruction(ad::Var<T> e0, ad::Var<T> e0_hat) {
  ad::detail::require_same_shape(e0, e0_hat, "loss_reconstruction");
  auto d = ad::sub(e0_hat, e0);
  return ad::mean(ad::row_sum(ad::mul(d, d)));
}

/// Which coefficient on e_t the reverse-step mean uses.
enum class ReverseMeanForm {
  posterior,  // sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t), the Gaussian posterior mean
  literal,    // sqrt(alpha_t (1 - abar_{t-1})) / (1 - abar_t); coefficients can sum above 1
};

inline ReverseMeanForm parse_reverse_mean(const std::string& s) {
  if (s == "posterior") return ReverseMeanForm::posterior;
  if (s == "literal") return ReverseMeanForm::literal;
  throw ConfigError("unknown reverse-mean form '" + s + "'");
}

inline std::string to_string(ReverseMeanForm f) {
  return f == ReverseMeanForm::posterior ? "posterior" : "literal";
}

/// Coefficients (on e_t, on e0_hat) of the reverse-step mean at step t.
struct ReverseCoefficients {
  double on_current;
  double on_prediction;
};

inline ReverseCoefficients reverse_coefficients(const NoiseSchedule& sched, std::size_t t,
                                                ReverseMeanForm form = ReverseMeanForm::posterior) {
  sched.check_step(t);
  const double a = sched.alpha_at(t);
  const double abar = sched.alpha_bar_at(t);
  const double abar_prev = sched.alpha_bar_at(t - 1);
  const double on_current = form == ReverseMeanForm::literal ? std::sqrt(a * (1.0 - abar_prev))
                                                             : std::sqrt(a) * (1.0 - abar_prev);
  return {on_current / (1.0 - abar), std::sqrt(abar_prev) * (1.0 - a) / (1.0 - abar)};
}

/// One deterministic reverse step. At t = 1 the result is e0_hat itself.
template <class T>
Tensor<T> reverse_mu(const Tensor<T>& et_hat, std::size_t t, const Tensor<T>& e0_hat, const NoiseSchedule& sched,
                     ReverseMeanForm form = ReverseMeanForm::posterior) {
  sched.check_step(t);
  if (et_hat.rows != e0_hat.rows || et_hat.cols != e0_hat.cols) throw ShapeError("reverse_mu: shapes differ");
  if (t == 1) return Tensor<T>(e0_hat.rows, e0_hat.cols, e0_hat.values);
  const auto c = reverse_coefficients(sched, t, form);
  const T c1 = static_cast<T>(c.on_current);
  const T c2 = static_cast<T>(c.on_prediction);
  Tensor<T> out(et_hat.rows, et_hat.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = c1 * et_hat.values[i] + c2 * e0_hat.values[i];
  return out;
}

/// Evaluates the denoiser outside of training; `params` must hold the den.* tensors.
template <class T>
Tensor<T> predict_e0(const ParamStore<T>& params, const Tensor<T>& et, const std::vector<std::size_t>& steps,
                     std::size_t total_steps, const DenoiserOptions& o) {
  ad::Tape<T> tape;
  DenoiserNet<T> net;
  net.options = o;
  net.steps = total_steps;
  auto leaf = [&](const char* name) {
    const auto& p = params.at(name);
    return tape.constant(p.rows, p.cols, p.values);
  };
  if (!o.sinusoidal_time) net.time_emb = leaf("den.time_emb");
  net.w1 = leaf("den.W1");
  net.b1 = leaf("den.b1");
  net.w2 = leaf("den.W2");
  net.b2 = leaf("den.b2");
  auto out = predict_e0(net, tape.constant(et.rows, et.cols, et.values), steps);
  return Tensor<T>(out.rows(), out.cols(), std::vector<T>(out.value().begin(), out.value().end()));
}

struct InferenceOptions {
  ReverseMeanForm form = ReverseMeanForm::posterior;
  bool stochastic = false;  // add posterior noise between steps
  std::uint64_t seed = 0;
};

/// Iterative reverse pass from step `steps` down to 1, starting at the observed
/// embeddings (the forward noising is skipped).
template <class T>
Tensor<T> denoise_inference(const Tensor<T>& observed, const ParamStore<T>& params, const NoiseSchedule& sched,
                            const DenoiserOptions& o, std::size_t steps, const InferenceOptions& inf = {}) {
  if (steps < 1) throw ConfigError("inference steps must be >= 1");
  if (steps > sched.steps) throw ConfigError("inference steps exceed the schedule length");
  std::mt19937_64 rng(inf.seed);
  std::normal_distribution<double> normal;
  Tensor<T> cur(observed.rows, observed.cols, observed.values);
  for (std::size_t t = steps; t >= 1; --t) {
    const std::vector<std::size_t> step_rows(cur.rows, t);
    const auto e0_hat = predict_e0(params, cur, step_rows, sched.steps, o);
    cur = reverse_mu(cur, t, e0_hat, sched, inf.form);
    if (inf.stochastic && t > 1) {
      const double var = sched.beta_at(t) * (1.0 - sched.alpha_bar_at(t - 1)) / (1.0 - sched.alpha_bar_at(t));
      const double sd = std::sqrt(var);
      for (auto& x : cur.values) x += static_cast<T>(sd * normal(rng));
    }
  }
  return cur;
}

}  // namespace recdiff
