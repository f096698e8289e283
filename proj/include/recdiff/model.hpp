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
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "recdiff/autodiff.hpp"
#include "recdiff/diffusion.hpp"
#include "recdiff/encoder.hpp"
#include "recdiff/error.hpp"
#include "recdiff/graph.hpp"
#include "recdiff/optim.hpp"

namespace recdiff {

enum class Variant {
  full,          // encoders + diffusion denoiser
  no_diffusion,  // -D: raw social embedding fused directly
  no_social,     // -S: interaction encoder only
  dae,           // denoising autoencoder in place of the diffusion module
};

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "-D" || s == "D" || s == "no-diffusion" || s == "no_diffusion") return Variant::no_diffusion;
  if (s == "-S" || s == "S" || s == "no-social" || s == "no_social") return Variant::no_social;
  if (s == "dae" || s == "DAE") return Variant::dae;
  throw ConfigError("unknown variant '" + s + "' (expected full, -D, -S or dae)");
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_diffusion: return "-D";
    case Variant::no_social: return "-S";
    case Variant::dae: return "dae";
  }
  return "?";
}

inline DiffusionLossMode parse_loss_mode(const std::string& s) {
  if (s == "elbo") return DiffusionLossMode::elbo;
  if (s == "recon-only" || s == "recon_only") return DiffusionLossMode::recon_only;
  throw ConfigError("unknown loss mode '" + s + "' (expected elbo or recon-only)");
}

inline std::string to_string(DiffusionLossMode m) { return m == DiffusionLossMode::elbo ? "elbo" : "recon-only"; }

struct ModelConfig {
  Variant variant = Variant::full;
  std::size_t dim = 64;             // d
  std::size_t time_dim = 16;        // d'
  std::size_t hidden = 0;           // denoiser/autoencoder width; 0 means d
  std::size_t layers = 2;           // L
  std::size_t steps = 50;           // T
  std::size_t inference_steps = 0;  // 0 means T
  double lr = 0.005;
  std::size_t batch_size = 2048;
  double lambda1 = 1.0;
  double lambda2 = 1e-5;
  double tau = 0.1;
  double s_max = 0.99;
  double s_min = 0.1;
  DiffusionLossMode loss_mode = DiffusionLossMode::elbo;
  Activation activation = Activation::leaky_relu;
  double slope = 0.2;
  bool weight_transform = false;
  bool share_social_table = false;
  bool sinusoidal_time = false;
  bool stochastic_inference = false;
  ReverseMeanForm reverse_mean = ReverseMeanForm::posterior;
  bool reuse_step = true;  // one (t, noise) draw feeds both the diffusion loss and the fusion term
  double dae_mask_rate = 0.3;
  bool fuse_raw_social = false;  // full variant: fuse e^s instead of the denoiser output (loss term unchanged)

  std::size_t hidden_width() const { return hidden == 0 ? dim : hidden; }
  std::size_t resolved_inference_steps() const { return inference_steps == 0 ? steps : inference_steps; }
  bool uses_social() const { return variant != Variant::no_social; }
  bool uses_diffusion() const { return variant == Variant::full; }

  void validate() const {
    if (dim < 1) throw ConfigError("d must be >= 1");
    if (time_dim < 1) throw ConfigError("d' must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(lr > 0)) throw ConfigError("learning rate must be positive");
    if (lambda1 < 0 || lambda2 < 0) throw ConfigError("loss weights must be non-negative");
    if (dae_mask_rate < 0 || dae_mask_rate >= 1) throw ConfigError("mask rate must be in [0, 1)");
    if (variant == Variant::full) {
      build_schedule(steps, s_max, s_min, tau);
      if (resolved_inference_steps() > steps) throw ConfigError("inference steps exceed T");
    }
  }

  EncoderOptions encoder_options() const { return {.layers = layers, .weight_transform = weight_transform}; }

  DenoiserOptions denoiser_options() const {
    return {.dim = dim, .time_dim = time_dim, .hidden = hidden_width(), .activation = activation, .slope = slope,
            .sinusoidal_time = sinusoidal_time};
  }

  /// One key=value per line, fixed key order, round-trippable numbers.
  std::string to_text() const {
    std::ostringstream os;
    auto num = [](double x) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      return std::string(buf);
    };
    os << "variant=" << to_string(variant) << "\n"
       << "d=" << dim << "\n"
       << "d-time=" << time_dim << "\n"
       << "hidden=" << hidden << "\n"
       << "layers=" << layers << "\n"
       << "T=" << steps << "\n"
       << "inference-steps=" << inference_steps << "\n"
       << "lr=" << num(lr) << "\n"
       << "batch-size=" << batch_size << "\n"
       << "lambda1=" << num(lambda1) << "\n"
       << "lambda2=" << num(lambda2) << "\n"
       << "tau=" << num(tau) << "\n"
       << "s-max=" << num(s_max) << "\n"
       << "s-min=" << num(s_min) << "\n"
       << "loss=" << to_string(loss_mode) << "\n"
       << "activation=" << to_string(activation) << "\n"
       << "slope=" << num(slope) << "\n"
       << "weight-transform=" << weight_transform << "\n"
       << "share-social-table=" << share_social_table << "\n"
       << "sinusoidal-time=" << sinusoidal_time << "\n"
       << "stochastic-inference=" << stochastic_inference << "\n"
       << "reverse-mean=" << to_string(reverse_mean) << "\n"
       << "reuse-step=" << reuse_step << "\n"
       << "dae-mask-rate=" << num(dae_mask_rate) << "\n"
       << "fuse-raw-social=" << fuse_raw_social << "\n";
    return os.str();
  }

  /// Applies one key=value setting; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value) {
    auto as_size = [&] {
      try {
        std::size_t pos = 0;
        const auto v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + value + "'");
      }
    };
    auto as_double = [&] {
      try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + value + "'");
      }
    };
    auto as_bool = [&] {
      if (value == "1" || value == "true") return true;
      if (value == "0" || value == "false") return false;
      throw ConfigError("bad flag for " + key + ": '" + value + "'");
    };
    if (key == "variant") variant = parse_variant(value);
    else if (key == "d") dim = as_size();
    else if (key == "d-time") time_dim = as_size();
    else if (key == "hidden") hidden = as_size();
    else if (key == "layers") layers = as_size();
    else if (key == "T") steps = as_size();
    else if (key == "inference-steps") inference_steps = as_size();
    else if (key == "lr") lr = as_double();
    else if (key == "batch-size") batch_size = as_size();
    else if (key == "lambda1") lambda1 = as_double();
    else if (key == "lambda2") lambda2 = as_double();
    else if (key == "tau") tau = as_double();
    else if (key == "s-max") s_max = as_double();
    else if (key == "s-min") s_min = as_double();
    else if (key == "loss") loss_mode = parse_loss_mode(value);
    else if (key == "activation") activation = parse_activation(value);
    else if (key == "slope") slope = as_double();
    else if (key == "weight-transform") weight_transform = as_bool();
    else if (key == "share-social-table") share_social_table = as_bool();
    else if (key == "sinusoidal-time") sinusoidal_time = as_bool();
    else if (key == "stochastic-inference") stochastic_inference = as_bool();
    else if (key == "reverse-mean") reverse_mean = parse_reverse_mean(value);
    else if (key == "reuse-step") reuse_step = as_bool();
    else if (key == "dae-mask-rate") dae_mask_rate = as_double();
    else if (key == "fuse-raw-social") fuse_raw_social = as_bool();
    else throw ConfigError("unknown model setting '" + key + "'");
  }

  static ModelConfig from_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("malformed config line '" + line + "'");
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
  }
};

/// e_u^r + denoised social embedding.
template <class T>
std::vector<T> fuse_user(std::span<const T> interaction, std::span<const T> social) {
  if (interaction.size() != social.size()) throw ShapeError("fuse_user: width mismatch");
  std::vector<T> out(interaction.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = interaction[i] + social[i];
  return out;
}

template <class T>
T score(std::span<const T> user, std::span<const T> item) {
  if (user.size() != item.size()) throw ShapeError("score: width mismatch");
  T acc = T(0);
  for (std::size_t i = 0; i < user.size(); ++i) acc += user[i] * item[i];
  return acc;
}

/// -log sigmoid(pos - neg), evaluated as softplus(neg - pos).
template <class T>
T bpr_loss(T pos, T neg) {
  const T x = neg - pos;
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

struct Triplet {
  NodeId user;
  NodeId pos;
  NodeId neg;
};

/// Random quantities consumed by one loss evaluation. Kept outside the loss so
/// the loss is a pure function of the parameters.
template <class T>
struct LossDraws {
  std::vector<std::size_t> steps;
  Tensor<T> noise;
  std::vector<std::size_t> fusion_steps;  // only when reuse_step is off
  Tensor<T> fusion_noise;
  Tensor<T> mask;  // DAE coordinate mask, already scaled by 1 / (1 - rate)
};

template <class T>
struct LossTerms {
  T total = T(0);
  T bpr = T(0);
  T diffusion = T(0);
};

/// Fused user table and item table used for all-item scoring.
template <class T>
struct ScoringEmbeddings {
  Tensor<T> users;
  Tensor<T> items;
};

template <class T>
class RecDiffModel {
 public:
  RecDiffModel(ModelConfig cfg, std::size_t num_users, std::size_t num_items, SparseGraph interaction_graph,
               SparseGraph social_graph, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        num_users_(num_users),
        num_items_(num_items),
        g_r_(std::move(interaction_graph)),
        g_s_(std::move(social_graph)) {
    cfg_.validate();
    if (g_r_.num_nodes != num_users + num_items) throw ShapeError("interaction graph size mismatch");
    if (cfg_.uses_social() && g_s_.num_nodes != num_users) throw ShapeError("social graph size mismatch");
    if (cfg_.uses_diffusion()) sched_ = build_schedule(cfg_.steps, cfg_.s_max, cfg_.s_min, cfg_.tau);
    // One generator per module, so variants sharing a module start from the same values.
    auto stream = [seed](std::uint64_t module) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(module)};
      return std::mt19937_64(seq);
    };
    const auto eo = cfg_.encoder_options();
    auto r0 = stream(0);
    register_encoder(params_, "enc_r", num_users + num_items, cfg_.dim, eo, r0);
    if (cfg_.uses_social()) {
      auto r1 = stream(1);
      if (cfg_.share_social_table) {
        if (eo.weight_transform)
          for (std::size_t l = 1; l <= eo.layers; ++l)
            params_.add("enc_s.W" + std::to_string(l), xavier_uniform<T>(cfg_.dim, cfg_.dim, cfg_.dim, cfg_.dim, 1.0, r1));
      } else {
        register_encoder(params_, "enc_s", num_users, cfg_.dim, eo, r1);
      }
    }
    if (cfg_.variant == Variant::full) {
      auto r2 = stream(2);
      register_denoiser(params_, cfg_.steps, cfg_.denoiser_options(), r2);
    }
    if (cfg_.variant == Variant::dae) {
      auto r3 = stream(3);
      const std::size_t h = cfg_.hidden_width();
      params_.add("dae.W1", xavier_uniform<T>(cfg_.dim, h, cfg_.dim, h, 1.0, r3));
      params_.add("dae.b1", Tensor<T>(1, h));
      params_.add("dae.W2", xavier_uniform<T>(h, cfg_.dim, h, cfg_.dim, 1.0, r3));
      params_.add("dae.b2", Tensor<T>(1, cfg_.dim));
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const NoiseSchedule& schedule() const { return sched_; }
  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  const SparseGraph& interaction_graph() const { return g_r_; }
  const SparseGraph& social_graph() const { return g_s_; }

  /// Samples steps, Gaussian noise and masks for a batch of `rows` triplets.
  template <class Rng>
  LossDraws<T> draw(std::size_t rows, Rng& rng) const {
    LossDraws<T> d;
    std::normal_distribution<double> normal;
    if (cfg_.variant == Variant::full) {
      std::uniform_int_distribution<std::size_t> step(1, cfg_.steps);
      auto fill = [&](std::vector<std::size_t>& steps, Tensor<T>& noise) {
        steps.resize(rows);
        for (auto& t : steps) t = step(rng);
        noise = Tensor<T>(rows, cfg_.dim);
        for (auto& x : noise.values) x = static_cast<T>(normal(rng));
      };
      fill(d.steps, d.noise);
      if (!cfg_.reuse_step) fill(d.fusion_steps, d.fusion_noise);
    }
    if (cfg_.variant == Variant::dae) {
      d.mask = Tensor<T>(rows, cfg_.dim);
      std::bernoulli_distribution keep(1.0 - cfg_.dae_mask_rate);
      const T scale = static_cast<T>(1.0 / (1.0 - cfg_.dae_mask_rate));
      for (auto& x : d.mask.values) x = keep(rng) ? scale : T(0);
    }
    return d;
  }

  /// Records the joint objective for `batch` on `tape`.
  ad::Var<T> build_loss(ad::Tape<T>& tape, const ParamBinding<T>& bound, std::span<const Triplet> batch,
                        const LossDraws<T>& draws, LossTerms<T>* terms = nullptr) const {
    if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
    const auto eo = cfg_.encoder_options();
    std::vector<std::size_t> users(batch.size()), pos(batch.size()), neg(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].user >= num_users_ || batch[i].pos >= num_items_ || batch[i].neg >= num_items_)
        throw std::out_of_range("triplet index out of range");
      users[i] = batch[i].user;
      pos[i] = num_users_ + batch[i].pos;
      neg[i] = num_users_ + batch[i].neg;
    }
    auto e_r = encode_interaction(g_r_, bind_encoder(bound, "enc_r", eo), eo);
    auto fused = ad::gather_rows(e_r, users);
    auto item_pos = ad::gather_rows(e_r, pos);
    auto item_neg = ad::gather_rows(e_r, neg);
    ad::Var<T> diffusion;
    bool has_diffusion = false;
    if (cfg_.uses_social()) {
      auto social_u = ad::gather_rows(social_embeddings(bound), users);
      switch (cfg_.variant) {
        case Variant::no_diffusion:
          fused = ad::add(fused, social_u);
          break;
        case Variant::full: {
          const auto net = bind_denoiser(bound, cfg_.steps, cfg_.denoiser_options());
          auto noisy = forward_closed_form(social_u, draws.steps, draws.noise, sched_);
          auto denoised = predict_e0(net, noisy, draws.steps);
          diffusion = diffusion_loss(social_u, denoised, draws.steps, sched_, cfg_.loss_mode);
          has_diffusion = true;
          if (!cfg_.reuse_step) {
            auto noisy2 = forward_closed_form(social_u, draws.fusion_steps, draws.fusion_noise, sched_);
            denoised = predict_e0(net, noisy2, draws.fusion_steps);
          }
          fused = ad::add(fused, cfg_.fuse_raw_social ? social_u : denoised);
          break;
        }
        case Variant::dae: {
          auto masked = ad::mul(social_u, tape.constant(draws.mask.rows, draws.mask.cols, draws.mask.values));
          auto rebuilt = autoencode(bound, masked);
          diffusion = loss_reconstruction(social_u, rebuilt);
          has_diffusion = true;
          fused = ad::add(fused, rebuilt);
          break;
        }
        case Variant::no_social:
          break;
      }
    }
    auto margin = ad::sub(ad::row_dot(fused, item_neg), ad::row_dot(fused, item_pos));
    auto bpr = ad::mean(ad::softplus(margin));
    auto total = has_diffusion ? ad::add(bpr, ad::scale(diffusion, static_cast<T>(cfg_.lambda1))) : bpr;
    if (terms) {
      terms->bpr = bpr.item();
      terms->diffusion = has_diffusion ? diffusion.item() : T(0);
      terms->total = total.item();
    }
    return total;
  }

  /// Loss value and parameter gradients for one batch.
  LossTerms<T> total_loss(std::span<const Triplet> batch, const LossDraws<T>& draws) {
    ad::Tape<T> tape;
    ParamBinding<T> bound(tape, params_);
    LossTerms<T> terms;
    auto loss = build_loss(tape, bound, batch, draws, &terms);
    tape.backward(loss);
    bound.export_grads();
    return terms;
  }

  /// Interaction-side embeddings E^r, (|U| + |V|) x d.
  Tensor<T> interaction_embeddings() const {
    ad::Tape<T> tape;
    auto bound = constant_binding(tape);
    const auto eo = cfg_.encoder_options();
    return to_tensor(encode_interaction(g_r_, bind_encoder(*bound, "enc_r", eo), eo));
  }

  /// Social-side embeddings E^s, |U| x d (empty for -S).
  Tensor<T> social_embeddings() const {
    if (!cfg_.uses_social()) return {};
    ad::Tape<T> tape;
    auto bound = constant_binding(tape);
    return to_tensor(social_embeddings(*bound));
  }

  /// Denoised (or raw, per variant) social contribution to each user, |U| x d.
  Tensor<T> social_contribution() const {
    if (!cfg_.uses_social()) return Tensor<T>(num_users_, cfg_.dim);
    auto es = social_embeddings();
    switch (cfg_.variant) {
      case Variant::full:
        if (cfg_.fuse_raw_social) return es;
        return denoise_inference(es, params_, sched_, cfg_.denoiser_options(), cfg_.resolved_inference_steps(),
                                 InferenceOptions{cfg_.reverse_mean, cfg_.stochastic_inference, 0});
      case Variant::dae: {
        ad::Tape<T> tape;
        auto bound = constant_binding(tape);
        return to_tensor(autoencode(*bound, tape.constant(es.rows, es.cols, es.values)));
      }
      default:
        return es;
    }
  }

  ScoringEmbeddings<T> scoring_embeddings() const {
    const auto e_r = interaction_embeddings();
    const std::size_t d = cfg_.dim;
    ScoringEmbeddings<T> out{Tensor<T>(num_users_, d), Tensor<T>(num_items_, d)};
    std::copy_n(e_r.values.begin(), num_users_ * d, out.users.values.begin());
    std::copy_n(e_r.values.begin() + static_cast<std::ptrdiff_t>(num_users_ * d), num_items_ * d,
                out.items.values.begin());
    if (cfg_.uses_social()) {
      const auto social = social_contribution();
      for (std::size_t i = 0; i < out.users.size(); ++i) out.users.values[i] += social.values[i];
    }
    return out;
  }

  /// Two-layer autoencoder of the dae variant.
  ad::Var<T> autoencode(const ParamBinding<T>& bound, ad::Var<T> x) const {
    auto h = ad::add_row_bias(ad::matmul(x, bound["dae.W1"]), bound["dae.b1"]);
    h = activate(h, cfg_.activation, cfg_.slope);
    return ad::add_row_bias(ad::matmul(h, bound["dae.W2"]), bound["dae.b2"]);
  }

  /// Replaces every parameter; names and shapes must match this model.
  void load_params(const ParamStore<T>& other) {
    if (other.size() != params_.size()) throw DataError("parameter count mismatch with model config");
    for (auto& [name, t] : params_) {
      const auto* src = other.find(name);
      if (!src) throw DataError("missing parameter " + name);
      if (src->rows != t.rows || src->cols != t.cols) {
        throw DataError("shape mismatch for " + name + ": " + std::to_string(src->rows) + "x" +
                        std::to_string(src->cols) + " vs " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
      }
      t.values = src->values;
    }
  }

 private:
  ad::Var<T> social_embeddings(const ParamBinding<T>& bound) const {
    const auto eo = cfg_.encoder_options();
    EncoderParams<T> p;
    if (cfg_.share_social_table) {
      std::vector<std::size_t> rows(num_users_);
      for (std::size_t i = 0; i < num_users_; ++i) rows[i] = i;
      p.table = ad::gather_rows(bound["enc_r.E0"], rows);
      if (eo.weight_transform)
        for (std::size_t l = 1; l <= eo.layers; ++l) p.weights.push_back(bound["enc_s.W" + std::to_string(l)]);
    } else {
      p = bind_encoder(bound, "enc_s", eo);
    }
    return encode_social(g_s_, p, eo);
  }

  // Evaluation-only binding: the copies are recorded without gradient tracking.
  std::unique_ptr<ParamBinding<T>> constant_binding(ad::Tape<T>& tape) const {
    auto& store = const_cast<ParamStore<T>&>(params_);
    return std::make_unique<ParamBinding<T>>(tape, store, /*track_grads=*/false);
  }

  static Tensor<T> to_tensor(ad::Var<T> v) {
    return Tensor<T>(v.rows(), v.cols(), std::vector<T>(v.value().begin(), v.value().end()));
  }

  ModelConfig cfg_;
  std::size_t num_users_;
  std::size_t num_items_;
  SparseGraph g_r_;
  SparseGraph g_s_;
  NoiseSchedule sched_;
  ParamStore<T> params_;
};

}  // namespace recdiff
