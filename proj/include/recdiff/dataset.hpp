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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "recdiff/error.hpp"
#include "recdiff/graph.hpp"
#include "recdiff/tensor.hpp"

namespace recdiff {

struct DatasetBundle {
  std::string name;
  InteractionMatrix interactions;
  SocialMatrix social;
  std::string provenance;
  std::vector<std::int64_t> user_ids;  // dense id -> original id
  std::vector<std::int64_t> item_ids;
};

namespace detail {

struct RawEdge {
  std::int64_t a;
  std::int64_t b;
};

inline std::vector<RawEdge> read_edge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<RawEdge> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream is(line);
    std::vector<std::string> tok;
    for (std::string t; is >> t;) tok.push_back(t);
    auto bad = [&](const std::string& why) {
      return DataError(path.string() + ":" + std::to_string(line_no) + ": " + why + ": '" + line + "'");
    };
    if (tok.size() < 2 || tok.size() > 3) throw bad("expected two ids");
    RawEdge e{};
    for (int k = 0; k < 2; ++k) {
      std::size_t pos = 0;
      std::int64_t v = 0;
      try {
        v = std::stoll(tok[k], &pos);
      } catch (const std::exception&) {
        throw bad("malformed id");
      }
      if (pos != tok[k].size()) throw bad("malformed id");
      (k == 0 ? e.a : e.b) = v;
    }
    if (tok.size() == 3) {  // rating or timestamp column, binarized away
      try {
        std::size_t pos = 0;
        std::stod(tok[2], &pos);
        if (pos != tok[2].size()) throw bad("malformed third column");
      } catch (const DataError&) {
        throw;
      } catch (const std::exception&) {
        throw bad("malformed third column");
      }
    }
    out.push_back(e);
  }
  if (out.empty()) throw DataError(path.string() + ": no edges");
  return out;
}

inline std::vector<std::int64_t> sorted_unique(std::vector<std::int64_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline NodeId dense_id(const std::vector<std::int64_t>& table, std::int64_t original) {
  return static_cast<NodeId>(std::lower_bound(table.begin(), table.end(), original) - table.begin());
}

}  // namespace detail

/// Reads "user item" and (optionally) "user user" edge lists. The user id space is
/// the set of users with at least one interaction; ties touching any other user
/// are dropped. Ids are remapped to 0..n-1 in ascending order of the originals.
inline DatasetBundle load_edge_lists(const std::filesystem::path& interactions_path,
                                     const std::optional<std::filesystem::path>& social_path,
                                     std::string name = {}) {
  const auto raw = detail::read_edge_file(interactions_path);
  std::vector<std::int64_t> us, is;
  for (const auto& e : raw) {
    us.push_back(e.a);
    is.push_back(e.b);
  }
  DatasetBundle b;
  b.name = name.empty() ? interactions_path.parent_path().filename().string() : std::move(name);
  b.user_ids = detail::sorted_unique(std::move(us));
  b.item_ids = detail::sorted_unique(std::move(is));
  std::vector<Edge> pairs;
  pairs.reserve(raw.size());
  for (const auto& e : raw) pairs.emplace_back(detail::dense_id(b.user_ids, e.a), detail::dense_id(b.item_ids, e.b));
  b.interactions = make_interactions(b.user_ids.size(), b.item_ids.size(), pairs);
  std::ostringstream prov;
  prov << "interactions=" << interactions_path.string() << " lines=" << raw.size();
  std::vector<Edge> ties;
  std::size_t dropped = 0, self_loops = 0;
  if (social_path) {
    const auto raw_s = detail::read_edge_file(*social_path);
    for (const auto& e : raw_s) {
      if (e.a == e.b) {
        ++self_loops;
        continue;
      }
      if (!std::binary_search(b.user_ids.begin(), b.user_ids.end(), e.a) ||
          !std::binary_search(b.user_ids.begin(), b.user_ids.end(), e.b)) {
        ++dropped;
        continue;
      }
      ties.emplace_back(detail::dense_id(b.user_ids, e.a), detail::dense_id(b.user_ids, e.b));
    }
    prov << " social=" << social_path->string() << " lines=" << raw_s.size() << " dropped_unknown_user=" << dropped
         << " dropped_self_loop=" << self_loops;
  }
  b.social = make_social(b.user_ids.size(), ties);
  b.provenance = prov.str();
  return b;
}

/// `dir/interactions.txt` plus `dir/social.txt` when present (or required).
inline DatasetBundle load_dataset_dir(const std::filesystem::path& dir, bool require_social = true) {
  if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  const auto social = dir / "social.txt";
  std::optional<std::filesystem::path> sp;
  if (std::filesystem::exists(social)) sp = social;
  else if (require_social) throw DataError("missing " + social.string());
  auto name = dir.filename().string();
  if (name.empty()) name = dir.parent_path().filename().string();
  return load_edge_lists(dir / "interactions.txt", sp, name);
}

/// Writes the bundle back as edge lists in original ids.
inline void save_edge_lists(const DatasetBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream inter(dir / "interactions.txt"), soc(dir / "social.txt");
  if (!inter || !soc) throw DataError("cannot write dataset to " + dir.string());
  inter << "# user item\n";
  for (auto [u, i] : b.interactions.pairs) inter << b.user_ids[u] << '\t' << b.item_ids[i] << '\n';
  soc << "# user user\n";
  for (auto [x, y] : b.social.edges)
    if (x < y) soc << b.user_ids[x] << '\t' << b.user_ids[y] << '\n';
}

struct SynthOptions {
  std::size_t num_users = 200;
  std::size_t num_items = 400;
  std::size_t communities = 4;          // K
  double intra_p = 0.1;
  double inter_p = 0.005;
  std::size_t items_per_community = 100;  // size of each community's item pool
  std::size_t interactions_per_user = 12;
  double noise_item_rate = 0.0;  // share of a user's interactions drawn uniformly from all items
  std::uint64_t seed = 1;
};

/// Planted-community fixture: block-model social ties and community item pools.
/// User u belongs to community u * K / num_users; pool c covers items
/// [c * items_per_community, (c + 1) * items_per_community).
inline DatasetBundle generate_synthetic(const SynthOptions& o) {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (o.communities < 2) throw ConfigError("synthetic: K must be >= 2");
  if (o.num_users < o.communities) throw ConfigError("synthetic: fewer users than communities");
  if (!prob_ok(o.intra_p) || !prob_ok(o.inter_p) || !prob_ok(o.noise_item_rate))
    throw ConfigError("synthetic: probabilities must lie in [0, 1]");
  if (o.items_per_community == 0 || o.communities * o.items_per_community > o.num_items)
    throw ConfigError("synthetic: item pools do not fit in the catalog");
  if (o.interactions_per_user == 0 || o.interactions_per_user > o.items_per_community)
    throw ConfigError("synthetic: interactions per user must be in [1, items per community]");
  std::mt19937_64 rng(o.seed);
  const auto community = [&](std::size_t u) { return u * o.communities / o.num_users; };
  std::vector<Edge> ties;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (NodeId a = 0; a < o.num_users; ++a)
    for (NodeId b = a + 1; b < o.num_users; ++b)
      if (unit(rng) < (community(a) == community(b) ? o.intra_p : o.inter_p)) ties.emplace_back(a, b);
  std::vector<Edge> pairs;
  std::uniform_int_distribution<std::size_t> any_item(0, o.num_items - 1), pool_item(0, o.items_per_community - 1);
  for (NodeId u = 0; u < o.num_users; ++u) {
    std::set<NodeId> chosen;
    const std::size_t base = community(u) * o.items_per_community;
    while (chosen.size() < o.interactions_per_user) {
      const bool noise = unit(rng) < o.noise_item_rate;
      chosen.insert(static_cast<NodeId>(noise ? any_item(rng) : base + pool_item(rng)));
    }
    for (NodeId i : chosen) pairs.emplace_back(u, i);
  }
  DatasetBundle b;
  b.name = "synthetic";
  b.interactions = make_interactions(o.num_users, o.num_items, pairs);
  b.social = make_social(o.num_users, ties);
  b.user_ids.resize(o.num_users);
  b.item_ids.resize(o.num_items);
  for (std::size_t i = 0; i < o.num_users; ++i) b.user_ids[i] = static_cast<std::int64_t>(i);
  for (std::size_t i = 0; i < o.num_items; ++i) b.item_ids[i] = static_cast<std::int64_t>(i);
  std::ostringstream prov;
  prov << "synthetic users=" << o.num_users << " items=" << o.num_items << " K=" << o.communities
       << " intra_p=" << o.intra_p << " inter_p=" << o.inter_p << " pool=" << o.items_per_community
       << " per_user=" << o.interactions_per_user << " noise_item_rate=" << o.noise_item_rate << " seed=" << o.seed;
  b.provenance = prov.str();
  return b;
}

/// Undirected ties as (a < b) pairs, sorted.
inline std::vector<Edge> undirected_ties(const SocialMatrix& sm) {
  std::vector<Edge> out;
  for (auto [a, b] : sm.edges)
    if (a < b) out.emplace_back(a, b);
  return out;
}

/// Replaces floor(ratio * |ties|) genuine ties with uniformly drawn pairs that are
/// neither self-loops nor ties of the input graph.
inline SocialMatrix inject_social_noise(const SocialMatrix& sm, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("noise ratio must lie in [0, 1)");
  auto ties = undirected_ties(sm);
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ties.size())));
  if (k == 0) return sm;
  const std::size_t n = sm.num_users;
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (all_pairs - ties.size() < k) throw DataError("social graph too dense to add the required fake ties");
  std::mt19937_64 rng(seed);
  const auto key = [n](NodeId a, NodeId b) { return static_cast<std::uint64_t>(a) * n + b; };
  std::unordered_set<std::uint64_t> taken;
  for (auto [a, b] : ties) taken.insert(key(a, b));
  std::shuffle(ties.begin(), ties.end(), rng);
  std::vector<Edge> kept(ties.begin() + static_cast<std::ptrdiff_t>(k), ties.end());
  std::vector<Edge> fakes;
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  std::size_t attempts = 0;
  const std::size_t budget = 64 * k + 1024;
  while (fakes.size() < k && attempts < budget) {
    ++attempts;
    NodeId a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (taken.insert(key(a, b)).second) fakes.emplace_back(a, b);
  }
  if (fakes.size() < k) {  // dense graph: sample from the explicit complement
    std::vector<Edge> free;
    for (NodeId a = 0; a < n; ++a)
      for (NodeId b = a + 1; b < n; ++b)
        if (!taken.count(key(a, b))) free.emplace_back(a, b);
    std::shuffle(free.begin(), free.end(), rng);
    free.resize(k - fakes.size());
    fakes.insert(fakes.end(), free.begin(), free.end());
  }
  kept.insert(kept.end(), fakes.begin(), fakes.end());
  return make_social(n, kept);
}

/// Counts of cosine similarity over social ties, 20 bins of width 0.1 on [-1, 1].
/// Bin i covers [-1 + 0.1 i, -1 + 0.1 (i + 1)); similarity 1 lands in the last bin.
/// Pairs involving a zero vector are skipped.
template <class T>
std::array<std::size_t, 20> similarity_histogram(const Tensor<T>& users, const SocialMatrix& sm) {
  if (users.rows != sm.num_users) throw ShapeError("similarity_histogram: row count mismatch");
  std::array<std::size_t, 20> bins{};
  const std::size_t d = users.cols;
  for (auto [a, b] : undirected_ties(sm)) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const double x = users.values[a * d + k], y = users.values[b * d + k];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    if (na == 0 || nb == 0) continue;
    const double cos = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
    const auto bin = static_cast<std::size_t>(std::floor((cos + 1.0) / 0.1 + 1e-9));
    ++bins[std::min<std::size_t>(bin, 19)];
  }
  return bins;
}

}  // namespace recdiff
