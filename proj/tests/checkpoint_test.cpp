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

#include "recdiff/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

namespace recdiff {
namespace {

namespace fs = std::filesystem;

struct Fixture {
  PreparedData data;
  Fixture() {
    SynthOptions so;
    so.num_users = 40;
    so.num_items = 80;
    so.items_per_community = 20;
    so.interactions_per_user = 6;
    const auto b = generate_synthetic(so);
    data = prepare(split(b.interactions, SplitSpec{}), b.social);
  }
  RecDiffModel<float> model(const ModelConfig& c, std::uint64_t seed = 3) const {
    return RecDiffModel<float>(c, 40, 80, data.interaction_graph, data.social_graph, seed);
  }
};

ModelConfig cfg() {
  ModelConfig c;
  c.dim = 8;
  c.time_dim = 4;
  c.steps = 10;
  return c;
}

fs::path temp_file(const std::string& tag) {
  return fs::temp_directory_path() / ("recdiff_ckpt_" + std::to_string(::getpid()) + "_" + tag + ".bin");
}

TEST(Checkpoint, RoundTripGivesBitIdenticalScores) {
  Fixture f;
  for (auto v : {Variant::full, Variant::no_diffusion, Variant::no_social, Variant::dae}) {
    auto c = cfg();
    c.variant = v;
    auto m = f.model(c);
    TrainOptions o;
    o.max_epochs = 2;
    const auto r = train(m, f.data, o);
    const auto path = temp_file(to_string(v));
    save_checkpoint(make_checkpoint(m, r.best_epoch, r.rng_state, "split-seed=4\n"), path);
    const auto ck = load_checkpoint(path);
    fs::remove(path);
    EXPECT_EQ(ck.epoch, r.best_epoch);
    EXPECT_EQ(ck.rng_state, r.rng_state);
    EXPECT_EQ(ck.run_text, "split-seed=4\n");
    EXPECT_EQ(ck.config_text, c.to_text());
    auto fresh = f.model(ck.config(), 99);
    restore_checkpoint(fresh, ck);
    const auto a = m.scoring_embeddings(), b = fresh.scoring_embeddings();
    EXPECT_EQ(a.users.values, b.users.values) << to_string(v);
    EXPECT_EQ(a.items.values, b.items.values) << to_string(v);
  }
}

TEST(Checkpoint, TruncatedFileIsRejectedCleanly) {
  Fixture f;
  auto m = f.model(cfg());
  const auto path = temp_file("trunc");
  save_checkpoint(make_checkpoint(m, 1, "state"), path);
  const auto size = fs::file_size(path);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, std::size_t{200}, size / 2, size - 1}) {
    std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(cut));
    EXPECT_THROW(load_checkpoint(path), DataError) << cut;
  }
  fs::remove(path);
}

TEST(Checkpoint, BadMagicAndVersionAreRejected) {
  const auto path = temp_file("magic");
  std::ofstream(path, std::ios::binary) << "XXXXjunkjunk";
  EXPECT_THROW(load_checkpoint(path), DataError);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("RDIF", 4);
    const char v[4] = {7, 0, 0, 0};
    out.write(v, 4);
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version 7"), std::string::npos);
  }
  fs::remove(path);
  EXPECT_THROW(load_checkpoint(temp_file("absent")), DataError);
}

TEST(Checkpoint, CrossConfigLoadIsRejected) {
  Fixture f;
  auto m = f.model(cfg());
  const auto ck = make_checkpoint(m, 0, "");
  auto other_cfg = cfg();
  other_cfg.dim = 16;
  auto other = f.model(other_cfg);
  EXPECT_THROW(restore_checkpoint(other, ck), DataError);
  auto same_shape = cfg();
  same_shape.lambda1 = 0.5;  // identical tensors, different run settings
  auto m2 = f.model(same_shape);
  EXPECT_THROW(restore_checkpoint(m2, ck), DataError);
}

}  // namespace
}  // namespace recdiff
