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

#include "recdiff/dataset.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <unistd.h>

namespace recdiff {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("recdiff_data_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path write(const std::string& name, const std::string& body) const {
    std::ofstream(path_ / name) << body;
    return path_ / name;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(LoadEdgeLists, RemapsIdsDensely) {
  TempDir dir;
  const auto b = load_edge_lists(dir.write("i.txt", "0 5\n0 7\n"), std::nullopt);
  EXPECT_EQ(b.interactions.num_users, 1u);
  EXPECT_EQ(b.interactions.num_items, 2u);
  EXPECT_EQ(b.item_ids, (std::vector<std::int64_t>{5, 7}));
}

TEST(LoadEdgeLists, CollapsesDuplicatesAndSkipsComments) {
  TempDir dir;
  const auto b = load_edge_lists(dir.write("i.txt", "# header\n3\t9\n3 9\n\n4 9 5\n"), std::nullopt);
  EXPECT_EQ(b.interactions.pairs.size(), 2u);
  EXPECT_EQ(b.interactions.num_users, 2u);
}

TEST(LoadEdgeLists, MalformedLineReportsLineNumber) {
  TempDir dir;
  const auto p = dir.write("i.txt", "1 2\n1 x\n");
  try {
    load_edge_lists(p, std::nullopt);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_edge_lists(dir.write("j.txt", "1\n"), std::nullopt), DataError);
  EXPECT_THROW(load_edge_lists(dir.write("k.txt", "1 2 3 4\n"), std::nullopt), DataError);
  EXPECT_THROW(load_edge_lists(dir.write("l.txt", "1 2 r\n"), std::nullopt), DataError);
}

TEST(LoadEdgeLists, EmptyOrMissingFileIsAnError) {
  TempDir dir;
  EXPECT_THROW(load_edge_lists(dir.write("e.txt", "# nothing\n"), std::nullopt), DataError);
  EXPECT_THROW(load_edge_lists(dir.path() / "absent.txt", std::nullopt), DataError);
  EXPECT_THROW(load_dataset_dir(dir.path() / "nope"), DataError);
}

TEST(LoadEdgeLists, SocialTiesAreSymmetrizedAndRestrictedToKnownUsers) {
  TempDir dir;
  const auto b = load_edge_lists(dir.write("i.txt", "10 1\n20 1\n30 2\n"),
                                 dir.write("s.txt", "10 20\n20 10\n20 30\n30 99\n10 10\n"));
  EXPECT_EQ(b.social.num_users, 3u);
  EXPECT_EQ(b.social.num_undirected(), 2u);
  EXPECT_EQ(b.social.edges, (std::vector<Edge>{{0, 1}, {1, 0}, {1, 2}, {2, 1}}));
  EXPECT_NE(b.provenance.find("dropped_unknown_user=1"), std::string::npos);
}

TEST(LoadEdgeLists, RemapIsABijectionOnObservedIds) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir;
    std::set<std::pair<std::int64_t, std::int64_t>> truth;
    std::string body;
    for (int k = 0; k < 60; ++k) {
      const auto u = static_cast<std::int64_t>(rng() % 1000) - 300;
      const auto i = static_cast<std::int64_t>(rng() % 5000);
      truth.emplace(u, i);
      body += std::to_string(u) + " " + std::to_string(i) + "\n";
    }
    const auto b = load_edge_lists(dir.write("i.txt", body), std::nullopt);
    std::set<std::pair<std::int64_t, std::int64_t>> back;
    for (auto [u, i] : b.interactions.pairs) back.emplace(b.user_ids[u], b.item_ids[i]);
    EXPECT_EQ(back, truth);
    EXPECT_TRUE(std::is_sorted(b.user_ids.begin(), b.user_ids.end()));
    EXPECT_EQ(std::set<std::int64_t>(b.user_ids.begin(), b.user_ids.end()).size(), b.user_ids.size());
  }
}

TEST(LoadEdgeLists, SaveAndReloadPreservesBundle) {
  TempDir dir;
  SynthOptions o;
  o.num_users = 40;
  o.num_items = 80;
  o.items_per_community = 20;
  o.interactions_per_user = 5;
  const auto b = generate_synthetic(o);
  save_edge_lists(b, dir.path() / "syn");
  const auto back = load_dataset_dir(dir.path() / "syn");
  EXPECT_EQ(back.social.edges.size(), b.social.edges.size());
  EXPECT_EQ(back.interactions.pairs.size(), b.interactions.pairs.size());
}

SynthOptions small_synth() {
  SynthOptions o;
  o.num_users = 120;
  o.num_items = 200;
  o.communities = 4;
  o.items_per_community = 30;
  o.interactions_per_user = 8;
  return o;
}

TEST(Synthetic, NoInterCommunityTiesWhenInterPIsZero) {
  auto o = small_synth();
  o.inter_p = 0.0;
  o.intra_p = 0.2;
  const auto b = generate_synthetic(o);
  EXPECT_GT(b.social.num_undirected(), 0u);
  for (auto [a, c] : b.social.edges) EXPECT_EQ(a * 4 / 120, c * 4 / 120);
}

TEST(Synthetic, InteractionsStayInCommunityPoolWithoutNoise) {
  const auto o = small_synth();
  const auto b = generate_synthetic(o);
  EXPECT_EQ(b.interactions.pairs.size(), o.num_users * o.interactions_per_user);
  for (auto [u, i] : b.interactions.pairs) EXPECT_EQ(i / 30, u * 4 / 120);
}

TEST(Synthetic, EqualProbabilitiesCarryNoCommunitySignal) {
  auto o = small_synth();
  o.intra_p = o.inter_p = 0.05;
  o.seed = 3;
  const auto b = generate_synthetic(o);
  std::size_t same = 0;
  for (auto [a, c] : undirected_ties(b.social)) same += (a * 4 / 120 == c * 4 / 120);
  // Same-community share of all pairs is (30*29/2*4) / (120*119/2) ≈ 0.244.
  const double share = static_cast<double>(same) / static_cast<double>(b.social.num_undirected());
  EXPECT_NEAR(share, 0.244, 0.08);
}

TEST(Synthetic, RejectsBadParameters) {
  auto o = small_synth();
  o.communities = 1;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
  o = small_synth();
  o.intra_p = 1.5;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
  o = small_synth();
  o.items_per_community = 100;
  EXPECT_THROW(generate_synthetic(o), ConfigError);
}

TEST(Synthetic, SameSeedSameBundle) {
  const auto a = generate_synthetic(small_synth()), b = generate_synthetic(small_synth());
  EXPECT_EQ(a.social.edges, b.social.edges);
  EXPECT_EQ(a.interactions.pairs, b.interactions.pairs);
}

SocialMatrix ring(std::size_t n) {
  std::vector<Edge> ties;
  for (NodeId i = 0; i < n; ++i) ties.emplace_back(i, static_cast<NodeId>((i + 1) % n));
  return make_social(n, ties);
}

TEST(InjectSocialNoise, ZeroRatioIsIdentity) {
  const auto sm = ring(12);
  EXPECT_EQ(inject_social_noise(sm, 0.0, 1).edges, sm.edges);
}

TEST(InjectSocialNoise, HalfOfTenEdges) {
  const auto sm = ring(10);
  const auto noisy = inject_social_noise(sm, 0.5, 4);
  const auto before = undirected_ties(sm), after = undirected_ties(noisy);
  ASSERT_EQ(after.size(), 10u);
  std::set<Edge> orig(before.begin(), before.end());
  std::size_t kept = 0;
  for (auto e : after) kept += orig.count(e);
  EXPECT_EQ(kept, 5u);
}

TEST(InjectSocialNoise, FakesAreDisjointFromOriginalsOverManySeeds) {
  std::mt19937_64 rng(1);
  std::vector<Edge> ties;
  for (NodeId a = 0; a < 60; ++a)
    for (NodeId b = a + 1; b < 60; ++b)
      if (rng() % 8 == 0) ties.emplace_back(a, b);
  const auto sm = make_social(60, ties);
  const auto orig_list = undirected_ties(sm);
  const std::set<Edge> orig(orig_list.begin(), orig_list.end());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double ratio = 0.05 + 0.9 * static_cast<double>(seed) / 100.0;
    const auto noisy = inject_social_noise(sm, ratio, seed);
    const auto after = undirected_ties(noisy);
    ASSERT_EQ(after.size(), orig.size());
    const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(orig.size())));
    std::size_t kept = 0;
    for (auto [a, b] : after) {
      ASSERT_NE(a, b);
      kept += orig.count({a, b});
    }
    ASSERT_EQ(kept, orig.size() - k) << seed;
    ASSERT_EQ(std::set<Edge>(after.begin(), after.end()).size(), after.size());
  }
}

TEST(InjectSocialNoise, Errors) {
  const auto sm = ring(10);
  EXPECT_THROW(inject_social_noise(sm, 1.0, 1), ConfigError);
  EXPECT_THROW(inject_social_noise(sm, -0.1, 1), ConfigError);
  // Complete graph on 4 nodes has no free pair left.
  const auto full = make_social(4, std::vector<Edge>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  EXPECT_THROW(inject_social_noise(full, 0.5, 1), DataError);
  // Nearly complete: the complement fallback still finds the single free pair.
  const auto almost = make_social(4, std::vector<Edge>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}});
  const auto noisy = inject_social_noise(almost, 0.2, 1);
  const auto after = undirected_ties(noisy);
  EXPECT_NE(std::find(after.begin(), after.end(), Edge{2, 3}), after.end());
}

TEST(SimilarityHistogram, Examples) {
  const auto sm = make_social(3, std::vector<Edge>{{0, 1}, {1, 2}});
  const Tensor<double> same(3, 2, std::vector<double>{1, 1, 1, 1, 1, 1});
  const auto h = similarity_histogram(same, sm);
  EXPECT_EQ(h[19], 2u);
  const Tensor<double> ortho(3, 2, std::vector<double>{1, 0, 0, 1, 1, 0});
  const auto g = similarity_histogram(ortho, sm);
  EXPECT_EQ(g[10], 2u);  // [0, 0.1)
  const Tensor<double> opposite(3, 2, std::vector<double>{1, 0, -1, 0, 0, 0});
  const auto k = similarity_histogram(opposite, sm);
  EXPECT_EQ(k[0], 1u);  // the zero vector pair is skipped
  EXPECT_EQ(k[0] + k[10] + k[19], 1u);
}

}  // namespace
}  // namespace recdiff
