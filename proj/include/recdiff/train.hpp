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
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "recdiff/dataset.hpp"
#include "recdiff/error.hpp"
#include "recdiff/graph.hpp"
#include "recdiff/metrics.hpp"
#include "recdiff/model.hpp"
#include "recdiff/optim.hpp"

namespace recdiff {

struct SplitSpec {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
  std::uint64_t seed = 1;

  void validate() const {
    if (train <= 0 || valid < 0 || test < 0 || std::abs(train + valid + test - 1.0) > 1e-9)
      throw ConfigError("split ratios must be non-negative and sum to 1");
  }
};

struct DataSplit {
  InteractionMatrix train;
  InteractionMatrix valid;
  InteractionMatrix test;
};

/// Per-user item lists, sorted.
inline UserItems items_by_user(const InteractionMatrix& im) {
  UserItems out(im.num_users);
  for (auto [u, i] : im.pairs) out[u].push_back(i);
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

/// Per-user stratified split. A user with n interactions sends round(test * n)
/// to test and round(valid * n) to valid, then gives back items (valid first)
/// until at least one remains in train.
inline DataSplit split(const InteractionMatrix& im, const SplitSpec& spec) {
  spec.validate();
  if (im.pairs.empty()) throw DataError("cannot split an empty dataset");
  std::mt19937_64 rng(spec.seed);
  const auto by_user = items_by_user(im);
  DataSplit s;
  for (auto* m : {&s.train, &s.valid, &s.test}) {
    m->num_users = im.num_users;
    m->num_items = im.num_items;
  }
  for (NodeId u = 0; u < by_user.size(); ++u) {
    auto items = by_user[u];
    if (items.empty()) continue;
    std::shuffle(items.begin(), items.end(), rng);
    const double n = static_cast<double>(items.size());
    auto n_test = static_cast<std::size_t>(std::llround(spec.test * n));
    auto n_valid = static_cast<std::size_t>(std::llround(spec.valid * n));
    while (n_test + n_valid >= items.size()) (n_valid > 0 ? n_valid : n_test)--;
    for (std::size_t k = 0; k < items.size(); ++k) {
      auto& dst = k < n_test ? s.test : (k < n_test + n_valid ? s.valid : s.train);
      dst.pairs.emplace_back(u, items[k]);
    }
  }
  for (auto* m : {&s.train, &s.valid, &s.test}) std::sort(m->pairs.begin(), m->pairs.end());
  return s;
}

inline const std::vector<std::size_t>& default_cutoffs() {
  static const std::vector<std::size_t> ns = {10, 20, 40};
  return ns;
}

/// Macro-averaged metrics over users with at least one target item.
struct MetricSet {
  std::vector<std::size_t> ns;
  std::vector<double> recall;
  std::vector<double> ndcg;
  std::size_t users = 0;

  std::size_t index_of(std::size_t n) const {
    const auto it = std::find(ns.begin(), ns.end(), n);
    if (it == ns.end()) throw std::out_of_range("cutoff " + std::to_string(n) + " was not evaluated");
    return static_cast<std::size_t>(it - ns.begin());
  }
  double recall_at(std::size_t n) const { return recall[index_of(n)]; }
  double ndcg_at(std::size_t n) const { return ndcg[index_of(n)]; }
};

/// Scores every item for every user with a target, drops masked items, ranks and
/// averages. Users are split across `threads` workers; each user's result is
/// independent of the partition, and the average is taken in user order.
template <class T>
MetricSet evaluate_all_rank(const ScoringEmbeddings<T>& emb, const std::vector<const UserItems*>& masks,
                            const UserItems& targets, const std::vector<std::size_t>& ns, std::size_t threads = 1) {
  if (ns.empty()) throw ConfigError("no cutoffs requested");
  const std::size_t num_users = emb.users.rows, num_items = emb.items.rows, d = emb.users.cols;
  if (targets.size() != num_users) throw ShapeError("evaluate_all_rank: target table size mismatch");
  const std::size_t max_n = *std::max_element(ns.begin(), ns.end());
  std::vector<NodeId> users;
  for (NodeId u = 0; u < num_users; ++u)
    if (!targets[u].empty()) users.push_back(u);
  std::vector<double> rec(users.size() * ns.size()), nd(users.size() * ns.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<T> scores(num_items);
    for (std::size_t k = begin; k < end; ++k) {
      const NodeId u = users[k];
      const T* uv = emb.users.values.data() + u * d;
      for (std::size_t i = 0; i < num_items; ++i) {
        const T* iv = emb.items.values.data() + i * d;
        T acc = T(0);
        for (std::size_t c = 0; c < d; ++c) acc += uv[c] * iv[c];
        scores[i] = acc;
      }
      std::vector<std::span<const NodeId>> m;
      for (const auto* table : masks) m.emplace_back((*table)[u]);
      const auto ranked = top_n<T>(scores, m, max_n);
      for (NodeId i : ranked)
        for (auto mm : m)
          if (contains_sorted(mm, i)) throw std::logic_error("masked item reached a ranked list");
      for (std::size_t j = 0; j < ns.size(); ++j) {
        rec[k * ns.size() + j] = recall_at_n(ranked, targets[u], ns[j]);
        nd[k * ns.size() + j] = ndcg_at_n(ranked, targets[u], ns[j]);
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, users.size()));
  if (threads == 1) {
    work(0, users.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (users.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back(work, std::min(users.size(), t * chunk), std::min(users.size(), (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }
  MetricSet out{ns, std::vector<double>(ns.size(), 0.0), std::vector<double>(ns.size(), 0.0), users.size()};
  for (std::size_t k = 0; k < users.size(); ++k)
    for (std::size_t j = 0; j < ns.size(); ++j) {
      out.recall[j] += rec[k * ns.size() + j];
      out.ndcg[j] += nd[k * ns.size() + j];
    }
  if (!users.empty())
    for (std::size_t j = 0; j < ns.size(); ++j) {
      out.recall[j] /= static_cast<double>(users.size());
      out.ndcg[j] /= static_cast<double>(users.size());
    }
  return out;
}

/// FNV-1a 64 over the canonical config text.
inline std::uint64_t config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

struct EvalReport {
  std::size_t epoch = 0;
  std::string variant;
  std::string config_hash;
  MetricSet metrics;
  double seconds_per_epoch = 0.0;  // wall clock; kept out of deterministic report files
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double bpr = 0.0;
  double diffusion = 0.0;
  MetricSet valid;
  MetricSet test;  // only filled when test tracking is on
  double seconds = 0.0;
};

struct TrainOptions {
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::uint64_t seed = 1;
  std::vector<std::size_t> ns = default_cutoffs();
  std::size_t early_stop_n = 20;
  bool mask_valid_in_test = true;
  bool track_test = false;
  std::size_t threads = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_valid = -1.0;
  EvalReport test;
  std::string rng_state;  // training generator after the last epoch
};

/// Everything a run needs besides its configuration.
struct PreparedData {
  DataSplit split;
  UserItems train_items;
  UserItems valid_items;
  UserItems test_items;
  SparseGraph interaction_graph;
  SparseGraph social_graph;
  SocialMatrix social;
};

inline PreparedData prepare(const DataSplit& s, const SocialMatrix& social) {
  PreparedData p;
  p.split = s;
  p.train_items = items_by_user(s.train);
  p.valid_items = items_by_user(s.valid);
  p.test_items = items_by_user(s.test);
  p.interaction_graph = build_bipartite(s.train);
  p.social = social;
  p.social_graph = build_social(social);
  return p;
}

/// Valid metrics mask train items; test metrics mask train (and valid when asked).
template <class T>
MetricSet evaluate_split(const RecDiffModel<T>& model, const PreparedData& data, bool test, const TrainOptions& o) {
  const auto emb = model.scoring_embeddings();
  std::vector<const UserItems*> masks = {&data.train_items};
  if (test && o.mask_valid_in_test) masks.push_back(&data.valid_items);
  return evaluate_all_rank(emb, masks, test ? data.test_items : data.valid_items, o.ns, o.threads);
}

/// One (user, positive, negative) triplet per training pair, negatives drawn
/// uniformly from the items the user has not interacted with, then shuffled.
template <class Rng>
std::vector<Triplet> sample_triplets(const InteractionMatrix& train, const UserItems& train_items, Rng& rng) {
  std::vector<Triplet> out;
  out.reserve(train.pairs.size());
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(train.num_items - 1));
  for (auto [u, i] : train.pairs) {
    if (train_items[u].size() >= train.num_items) continue;  // no negative exists
    NodeId j;
    do j = pick(rng);
    while (contains_sorted(train_items[u], j));
    out.push_back({u, i, j});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

inline std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

/// Runs one epoch of minibatch Adam; returns (loss, bpr, diffusion) means over triplets.
template <class T, class Rng>
LossTerms<double> train_epoch(RecDiffModel<T>& model, AdamState<T>& opt, const PreparedData& data, Rng& rng) {
  const auto triplets = sample_triplets(data.split.train, data.train_items, rng);
  const std::size_t bs = model.config().batch_size;
  LossTerms<double> sum;
  for (std::size_t start = 0; start < triplets.size(); start += bs) {
    const std::span<const Triplet> batch(triplets.data() + start, std::min(bs, triplets.size() - start));
    const auto draws = model.draw(batch.size(), rng);
    const auto terms = model.total_loss(batch, draws);
    if (!std::isfinite(static_cast<double>(terms.total)))
      throw DivergenceError("non-finite loss at batch starting " + std::to_string(start));
    adam_step(model.params(), opt);
    const auto w = static_cast<double>(batch.size());
    sum.total += w * terms.total;
    sum.bpr += w * terms.bpr;
    sum.diffusion += w * terms.diffusion;
  }
  const auto n = static_cast<double>(std::max<std::size_t>(1, triplets.size()));
  return {sum.total / n, sum.bpr / n, sum.diffusion / n};
}

inline AdamOptions adam_options(const ModelConfig& c) { return {.lr = c.lr, .weight_decay = c.lambda2}; }

/// Trains with early stopping on valid Recall@early_stop_n and restores the best
/// parameters before the final test evaluation.
template <class T>
TrainResult train(RecDiffModel<T>& model, const PreparedData& data, const TrainOptions& o) {
  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(o.seed);
  AdamState<T> opt{adam_options(model.config())};
  TrainResult r;
  ParamStore<T> best = model.params();
  std::size_t since_best = 0;
  double seconds = 0.0;
  for (std::size_t epoch = 1; epoch <= o.max_epochs; ++epoch) {
    const auto t0 = clock::now();
    const auto terms = train_epoch(model, opt, data, rng);
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    seconds += dt;
    EpochRecord rec{epoch, terms.total, terms.bpr, terms.diffusion, evaluate_split(model, data, false, o), {}, dt};
    if (o.track_test) rec.test = evaluate_split(model, data, true, o);
    const double v = rec.valid.users ? rec.valid.recall_at(o.early_stop_n) : -terms.total;
    if (v > r.best_valid || r.best_epoch == 0) {
      r.best_valid = v;
      r.best_epoch = epoch;
      best = model.params();
      since_best = 0;
    } else {
      ++since_best;
    }
    r.history.push_back(rec);
    if (o.on_epoch) o.on_epoch(rec);
    if (since_best >= o.patience) break;
  }
  model.load_params(best);
  r.rng_state = rng_text(rng);
  r.test.epoch = r.best_epoch;
  r.test.variant = to_string(model.config().variant);
  r.test.config_hash = hex64(config_hash(model.config().to_text()));
  r.test.metrics = evaluate_split(model, data, true, o);
  r.test.seconds_per_epoch = r.history.empty() ? 0.0 : seconds / static_cast<double>(r.history.size());
  return r;
}

/// Builds a fresh model on `data` and trains it.
template <class T = float>
TrainResult run_once(const ModelConfig& cfg, const PreparedData& data, std::uint64_t seed, TrainOptions o) {
  o.seed = seed;
  RecDiffModel<T> model(cfg, data.split.train.num_users, data.split.train.num_items, data.interaction_graph,
                        data.social_graph, seed);
  return train(model, data, o);
}

// ---------------------------------------------------------------------------
// Sweeps and the robustness harness.

struct SweepGrid {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> steps;
  std::vector<double> taus;
  std::vector<double> lambda1s;
};

struct SweepRow {
  ModelConfig config;
  EvalReport report;
};

/// Cartesian product over the non-empty axes of `grid`, applied on top of `base`.
inline std::vector<ModelConfig> expand_grid(const ModelConfig& base, const SweepGrid& grid) {
  std::vector<ModelConfig> out = {base};
  auto axis = [&out](const auto& values, auto apply) {
    if (values.empty()) return;
    std::vector<ModelConfig> next;
    for (const auto& c : out)
      for (const auto& v : values) {
        auto copy = c;
        apply(copy, v);
        next.push_back(copy);
      }
    out = std::move(next);
  };
  axis(grid.dims, [](ModelConfig& c, std::size_t v) { c.dim = v; });
  axis(grid.steps, [](ModelConfig& c, std::size_t v) { c.steps = v; });
  axis(grid.taus, [](ModelConfig& c, double v) { c.tau = v; });
  axis(grid.lambda1s, [](ModelConfig& c, double v) { c.lambda1 = v; });
  return out;
}

template <class T = float>
std::vector<SweepRow> sweep(const ModelConfig& base, const SweepGrid& grid, const PreparedData& data,
                            std::uint64_t seed, const TrainOptions& o) {
  std::vector<SweepRow> rows;
  for (const auto& cfg : expand_grid(base, grid)) rows.push_back({cfg, run_once<T>(cfg, data, seed, o).test});
  return rows;
}

struct RobustnessRow {
  std::string variant;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  MetricSet metrics;
};

struct RobustnessSummary {
  std::string variant;
  double ratio = 0.0;
  double median_ndcg = 0.0;
  double median_relative_drop = 0.0;  // (ndcg at ratio 0 - ndcg) / ndcg at ratio 0, median over seeds
};

struct RobustnessResult {
  std::vector<RobustnessRow> rows;
  std::vector<RobustnessSummary> summary;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// For every ratio and seed: corrupt the social graph, retrain each config from
/// scratch on the same split, evaluate on the untouched test set.
template <class T = float>
RobustnessResult robustness_experiment(const std::vector<ModelConfig>& cfgs, const DataSplit& s,
                                       const SocialMatrix& social, const std::vector<double>& ratios,
                                       const std::vector<std::uint64_t>& seeds, const TrainOptions& o,
                                       std::size_t metric_n = 20) {
  for (double r : ratios)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("noise ratio must lie in [0, 1)");
  if (std::find(ratios.begin(), ratios.end(), 0.0) == ratios.end())
    throw ConfigError("robustness ratios must include 0 as the reference");
  RobustnessResult out;
  for (double ratio : ratios)
    for (std::uint64_t seed : seeds) {
      const auto noisy = inject_social_noise(social, ratio, seed);
      const auto data = prepare(s, noisy);
      for (const auto& cfg : cfgs)
        out.rows.push_back({to_string(cfg.variant), ratio, seed, run_once<T>(cfg, data, seed, o).test.metrics});
    }
  auto ndcg_of = [&](const std::string& v, double ratio, std::uint64_t seed) {
    for (const auto& r : out.rows)
      if (r.variant == v && r.ratio == ratio && r.seed == seed) return r.metrics.ndcg_at(metric_n);
    return 0.0;
  };
  for (const auto& cfg : cfgs) {
    const auto v = to_string(cfg.variant);
    for (double ratio : ratios) {
      std::vector<double> nd, drop;
      for (auto seed : seeds) {
        const double base = ndcg_of(v, 0.0, seed), x = ndcg_of(v, ratio, seed);
        nd.push_back(x);
        drop.push_back(base > 0 ? (base - x) / base : 0.0);
      }
      out.summary.push_back({v, ratio, median(nd), median(drop)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report files: one header line naming the fields, then one record per line.

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << x;
  return os.str();
}

inline void write_metric_header(std::ostream& os, const std::vector<std::size_t>& ns) {
  for (auto n : ns) os << "\trecall@" << n << "\tndcg@" << n;
}

inline void write_metric_fields(std::ostream& os, const MetricSet& m) {
  for (std::size_t j = 0; j < m.ns.size(); ++j) os << '\t' << fmt(m.recall[j]) << '\t' << fmt(m.ndcg[j]);
}

/// Config echo as '#' lines ahead of the header.
inline void write_config_echo(std::ostream& os, const std::string& text) {
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) os << "# " << line << '\n';
}

inline void write_history(std::ostream& os, const std::vector<EpochRecord>& history, const std::vector<std::size_t>& ns,
                          bool with_test) {
  os << "epoch\tloss\tbpr\tdiffusion";
  std::ostringstream h;
  write_metric_header(h, ns);
  std::string cols = h.str();
  std::string valid_cols, test_cols;
  for (std::size_t p = 0; p < cols.size();) {  // prefix every metric column
    const auto q = cols.find('\t', p + 1);
    const auto name = cols.substr(p + 1, q == std::string::npos ? std::string::npos : q - p - 1);
    valid_cols += "\tvalid_" + name;
    test_cols += "\ttest_" + name;
    if (q == std::string::npos) break;
    p = q;
  }
  os << valid_cols << (with_test ? test_cols : "") << '\n';
  for (const auto& r : history) {
    os << r.epoch << '\t' << fmt(r.loss) << '\t' << fmt(r.bpr) << '\t' << fmt(r.diffusion);
    write_metric_fields(os, r.valid);
    if (with_test) write_metric_fields(os, r.test);
    os << '\n';
  }
}

inline void write_eval_report(std::ostream& os, const EvalReport& r) {
  os << "variant\tepoch\tconfig_hash\tusers";
  write_metric_header(os, r.metrics.ns);
  os << '\n' << r.variant << '\t' << r.epoch << '\t' << r.config_hash << '\t' << r.metrics.users;
  write_metric_fields(os, r.metrics);
  os << '\n';
}

/// Human-readable table: rows are cutoffs, columns Recall and NDCG.
inline void print_eval_table(std::ostream& os, const EvalReport& r) {
  os << "variant " << r.variant << "  epoch " << r.epoch << "  config " << r.config_hash << "  users "
     << r.metrics.users << "\n";
  os << std::left << std::setw(8) << "N" << std::setw(12) << "Recall" << "NDCG\n";
  for (std::size_t j = 0; j < r.metrics.ns.size(); ++j)
    os << std::left << std::setw(8) << r.metrics.ns[j] << std::setw(12) << fmt(r.metrics.recall[j])
       << fmt(r.metrics.ndcg[j]) << "\n";
}

}  // namespace recdiff
