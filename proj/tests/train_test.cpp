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

#include "recdiff/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

namespace recdiff {
namespace {

InteractionMatrix user_with(std::size_t n) {
  std::vector<Edge> pairs;
  for (NodeId i = 0; i < n; ++i) pairs.emplace_back(0, i);
  return make_interactions(1, std::max<std::size_t>(n, 1), pairs);
}

TEST(Split, TenInteractionsGoSevenOneTwo) {
  const auto s = split(user_with(10), SplitSpec{});
  EXPECT_EQ(s.train.pairs.size(), 7u);
  EXPECT_EQ(s.valid.pairs.size(), 1u);
  EXPECT_EQ(s.test.pairs.size(), 2u);
}

TEST(Split, SingleInteractionStaysInTrain) {
  const auto s = split(user_with(1), SplitSpec{});
  EXPECT_EQ(s.train.pairs.size(), 1u);
  EXPECT_TRUE(s.test.pairs.empty());
}

TEST(Split, EmptyDatasetAndBadRatiosThrow) {
  EXPECT_THROW(split(make_interactions(2, 2, {}), SplitSpec{}), DataError);
  EXPECT_THROW(split(user_with(5), SplitSpec{.train = 0.5, .valid = 0.1, .test = 0.1}), ConfigError);
}

InteractionMatrix random_interactions(std::size_t users, std::size_t items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Edge> pairs;
  for (NodeId u = 0; u < users; ++u) {
    const std::size_t n = 1 + rng() % 15;
    for (std::size_t k = 0; k < n; ++k) pairs.emplace_back(u, static_cast<NodeId>(rng() % items));
  }
  return make_interactions(users, items, pairs);
}

TEST(Split, PartitionsEveryInteractionOnceAndKeepsATrainItem) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto im = random_interactions(50, 80, seed);
    const auto s = split(im, SplitSpec{.seed = seed});
    std::vector<Edge> all = s.train.pairs;
    all.insert(all.end(), s.valid.pairs.begin(), s.valid.pairs.end());
    all.insert(all.end(), s.test.pairs.begin(), s.test.pairs.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all, im.pairs);
    const auto tr = items_by_user(s.train), all_items = items_by_user(im);
    for (NodeId u = 0; u < 50; ++u)
      if (!all_items[u].empty()) {
        ASSERT_FALSE(tr[u].empty()) << u;
      }
  }
}

TEST(Split, SameSeedSameSplit) {
  const auto im = random_interactions(40, 60, 3);
  const auto a = split(im, SplitSpec{.seed = 11}), b = split(im, SplitSpec{.seed = 11});
  const auto c = split(im, SplitSpec{.seed = 12});
  EXPECT_EQ(a.test.pairs, b.test.pairs);
  EXPECT_EQ(a.valid.pairs, b.valid.pairs);
  EXPECT_NE(a.test.pairs, c.test.pairs);
}

TEST(SampleTriplets, NegativesAreNeverTrainItems) {
  const auto im = random_interactions(30, 40, 8);
  const auto items = items_by_user(im);
  std::mt19937_64 rng(1);
  const auto t = sample_triplets(im, items, rng);
  EXPECT_EQ(t.size(), im.pairs.size());
  for (const auto& x : t) {
    EXPECT_TRUE(contains_sorted(items[x.user], x.pos));
    EXPECT_FALSE(contains_sorted(items[x.user], x.neg));
  }
}

// Five users, eight items, two taste groups.
PreparedData toy_data() {
  const std::vector<Edge> pairs = {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 3}, {2, 1}, {2, 2},
                                   {3, 4}, {3, 5}, {3, 6}, {4, 5}, {4, 6}, {4, 7}, {2, 3}, {3, 7}};
  const auto im = make_interactions(5, 8, pairs);
  const auto social = make_social(5, std::vector<Edge>{{0, 1}, {1, 2}, {3, 4}, {2, 4}});
  return prepare(split(im, SplitSpec{.seed = 2}), social);
}

ModelConfig toy_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.dim = 8;
  c.time_dim = 4;
  c.steps = 10;
  c.lr = 0.01;
  c.batch_size = 64;
  return c;
}

// Fixed triplets and draws make each full-batch epoch a deterministic step on one objective.
TEST(Train, ToyLossStrictlyDecreasesOverTenEpochs) {
  const auto data = toy_data();
  for (auto v : {Variant::full, Variant::no_diffusion, Variant::no_social, Variant::dae}) {
    RecDiffModel<double> m(toy_config(v), 5, 8, data.interaction_graph, data.social_graph, 3);
    std::mt19937_64 rng(3);
    const auto triplets = sample_triplets(data.split.train, data.train_items, rng);
    const auto draws = m.draw(triplets.size(), rng);
    AdamState<double> opt{adam_options(m.config())};
    std::vector<double> losses;
    for (int epoch = 0; epoch < 10; ++epoch) {
      losses.push_back(m.total_loss(triplets, draws).total);
      adam_step(m.params(), opt);
    }
    for (std::size_t e = 1; e < losses.size(); ++e)
      EXPECT_LT(losses[e], losses[e - 1]) << to_string(v) << " epoch " << e + 1;
  }
}

TEST(Train, DiffusionTermDecreasesWhenWeighted) {
  const auto data = toy_data();
  TrainOptions o;
  o.max_epochs = 60;
  o.patience = 1000;
  for (double lambda1 : {0.0, 1.0}) {
    auto c = toy_config(Variant::full);
    c.lambda1 = lambda1;
    const auto r = run_once<double>(c, data, 4, o);
    auto window = [&](std::size_t from) {
      double s = 0;
      for (std::size_t e = from; e < from + 10; ++e) s += r.history[e].diffusion;
      return s / 10;
    };
    if (lambda1 > 0) {
      EXPECT_LT(window(50), 0.5 * window(0));
    }
    EXPECT_GT(window(0), 0.0);
  }
}

TEST(Train, EarlyStoppingRestoresTheBestValidModel) {
  SynthOptions so;
  so.num_users = 60;
  so.num_items = 120;
  so.items_per_community = 30;
  so.interactions_per_user = 10;
  so.noise_item_rate = 0.3;
  const auto b = generate_synthetic(so);
  const auto data = prepare(split(b.interactions, SplitSpec{}), b.social);
  auto c = toy_config(Variant::full);
  c.lr = 0.02;
  TrainOptions o;
  o.max_epochs = 40;
  o.patience = 5;
  RecDiffModel<float> m(c, 60, 120, data.interaction_graph, data.social_graph, 5);
  const auto r = train(m, data, o);
  EXPECT_LE(r.history.size(), r.best_epoch + o.patience);
  double best_seen = -1;
  for (const auto& h : r.history) best_seen = std::max(best_seen, h.valid.recall_at(20));
  EXPECT_EQ(r.best_valid, best_seen);
  EXPECT_EQ(evaluate_split(m, data, false, o).recall_at(20), r.best_valid);
  EXPECT_EQ(r.test.epoch, r.best_epoch);
}

TEST(Train, NonFiniteLossAborts) {
  const auto data = toy_data();
  RecDiffModel<float> m(toy_config(Variant::no_social), 5, 8, data.interaction_graph, data.social_graph, 1);
  m.params().at("enc_r.E0").values[0] = std::nanf("");
  EXPECT_THROW(train(m, data, TrainOptions{}), DivergenceError);
}

TEST(Train, SameSeedSameHistory) {
  const auto data = toy_data();
  TrainOptions o;
  o.max_epochs = 5;
  const auto a = run_once<float>(toy_config(Variant::full), data, 9, o);
  const auto b = run_once<float>(toy_config(Variant::full), data, 9, o);
  std::ostringstream sa, sb;
  write_history(sa, a.history, o.ns, false);
  write_history(sb, b.history, o.ns, false);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.rng_state, b.rng_state);
}

TEST(Train, PlantedCommunitiesAreRecoveredInEmbeddings) {
  SynthOptions so;  // K=4, 200 users, intra 0.1, inter 0.005
  const auto b = generate_synthetic(so);
  const auto data = prepare(split(b.interactions, SplitSpec{}), b.social);
  auto c = toy_config(Variant::full);
  c.dim = 16;
  TrainOptions o;
  o.max_epochs = 15;
  RecDiffModel<float> m(c, so.num_users, so.num_items, data.interaction_graph, data.social_graph, 1);
  train(m, data, o);
  const auto emb = m.scoring_embeddings().users;
  double within = 0, across = 0;
  std::size_t nw = 0, na = 0;
  for (std::size_t a = 0; a < so.num_users; ++a)
    for (std::size_t x = a + 1; x < so.num_users; ++x) {
      double dot = 0, n1 = 0, n2 = 0;
      for (std::size_t k = 0; k < c.dim; ++k) {
        dot += emb.values[a * c.dim + k] * emb.values[x * c.dim + k];
        n1 += emb.values[a * c.dim + k] * emb.values[a * c.dim + k];
        n2 += emb.values[x * c.dim + k] * emb.values[x * c.dim + k];
      }
      const double cos = dot / std::sqrt(n1 * n2);
      if (a * 4 / 200 == x * 4 / 200) within += cos, ++nw;
      else across += cos, ++na;
    }
  EXPECT_GT(within / nw, across / na + 0.2);
}

TEST(Sweep, ExpandsCartesianProduct) {
  const auto cfgs = expand_grid(ModelConfig{}, SweepGrid{{32, 64}, {20, 50, 100}, {1.0, 0.1}, {}});
  EXPECT_EQ(cfgs.size(), 12u);
  EXPECT_EQ(expand_grid(ModelConfig{}, SweepGrid{}).size(), 1u);
}

TEST(Sweep, GridOfOneEqualsSingleRun) {
  const auto data = toy_data();
  TrainOptions o;
  o.max_epochs = 3;
  const auto c = toy_config(Variant::full);
  const auto rows = sweep<float>(c, SweepGrid{{8}, {}, {}, {}}, data, 6, o);
  ASSERT_EQ(rows.size(), 1u);
  const auto single = run_once<float>(c, data, 6, o);
  EXPECT_EQ(rows[0].report.metrics.recall, single.test.metrics.recall);
  EXPECT_EQ(rows[0].report.metrics.ndcg, single.test.metrics.ndcg);
}

TEST(Robustness, ZeroRatioMatchesNormalPipeline) {
  const auto data = toy_data();
  TrainOptions o;
  o.max_epochs = 3;
  const auto c = toy_config(Variant::full);
  const auto r = robustness_experiment<float>({c}, data.split, data.social, {0.0, 0.5}, {6}, o);
  const auto single = run_once<float>(c, data, 6, o);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].metrics.ndcg, single.test.metrics.ndcg);
  EXPECT_EQ(r.summary[0].median_relative_drop, 0.0);
  EXPECT_THROW(robustness_experiment<float>({c}, data.split, data.social, {0.0, 1.0}, {6}, o), ConfigError);
}

TEST(Reports, HeaderAndRecordsHaveMatchingFieldCounts) {
  const auto data = toy_data();
  TrainOptions o;
  o.max_epochs = 2;
  o.track_test = true;
  const auto r = run_once<float>(toy_config(Variant::dae), data, 1, o);
  std::ostringstream hist, rep;
  write_history(hist, r.history, o.ns, true);
  write_eval_report(rep, r.test);
  for (const auto& text : {hist.str(), rep.str()}) {
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    const auto fields = std::count(line.begin(), line.end(), '\t');
    EXPECT_NE(line.find("recall@20"), std::string::npos);
    while (std::getline(is, line)) EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), fields);
  }
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
}

}  // namespace
}  // namespace recdiff
