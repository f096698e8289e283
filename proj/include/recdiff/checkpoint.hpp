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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "recdiff/error.hpp"
#include "recdiff/model.hpp"
#include "recdiff/optim.hpp"
#include "recdiff/train.hpp"

namespace recdiff {

inline constexpr char kCheckpointMagic[4] = {'R', 'D', 'I', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout, all integers little-endian:
///   "RDIF" u32 version
///   u32 len, config text (canonical key=value lines)
///   u64 num_users, u64 num_items
///   u32 count, then per tensor: u32 len, name, u64 rows, u64 cols, rows*cols f32
///   u64 epoch, u32 len, generator state text
///   u32 len, run settings text (data, split seed, cutoffs; free-form key=value)
struct Checkpoint {
  std::string config_text;
  std::uint64_t num_users = 0;
  std::uint64_t num_items = 0;
  ParamStore<float> params;
  std::uint64_t epoch = 0;
  std::string rng_state;
  std::string run_text;

  ModelConfig config() const { return ModelConfig::from_text(config_text); }
};

namespace detail {

class ByteWriter {
 public:
  template <class U>
  void put(U x) {
    static_assert(std::is_integral_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<char>((static_cast<std::uint64_t>(x) >> (8 * i)) & 0xff));
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  void put_text(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<char> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> b) : bytes_(std::move(b)) {}
  template <class U>
  U get() {
    need(sizeof(U));
    std::uint64_t x = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(x);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string get_text() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::string get_raw(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <class T>
Checkpoint make_checkpoint(const RecDiffModel<T>& model, std::uint64_t epoch, std::string rng_state,
                           std::string run_text = {}) {
  Checkpoint c;
  c.config_text = model.config().to_text();
  c.num_users = model.num_users();
  c.num_items = model.num_items();
  for (const auto& [name, t] : model.params()) c.params.add(name, t.template cast<float>());
  c.epoch = epoch;
  c.rng_state = std::move(rng_state);
  c.run_text = std::move(run_text);
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes.insert(w.bytes.end(), kCheckpointMagic, kCheckpointMagic + 4);
  w.put(kCheckpointVersion);
  w.put_text(c.config_text);
  w.put(c.num_users);
  w.put(c.num_items);
  w.put(static_cast<std::uint32_t>(c.params.size()));
  for (const auto& [name, t] : c.params) {
    w.put_text(name);
    w.put(static_cast<std::uint64_t>(t.rows));
    w.put(static_cast<std::uint64_t>(t.cols));
    for (float x : t.values) w.put_f32(x);
  }
  w.put(c.epoch);
  w.put_text(c.rng_state);
  w.put_text(c.run_text);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw DataError("short write to checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(std::move(bytes));
  if (r.get_raw(4) != std::string(kCheckpointMagic, 4)) throw DataError("not a checkpoint (bad magic): " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.config_text = r.get_text();
  c.num_users = r.get<std::uint64_t>();
  c.num_items = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    auto name = r.get_text();
    const auto rows = r.get<std::uint64_t>(), cols = r.get<std::uint64_t>();
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw DataError("implausible tensor shape for " + name);
    Tensor<float> t(rows, cols);
    for (auto& x : t.values) x = r.get_f32();
    c.params.add(name, std::move(t));
  }
  c.epoch = r.get<std::uint64_t>();
  c.rng_state = r.get_text();
  c.run_text = r.get_text();
  if (!r.at_end()) throw DataError("trailing bytes after checkpoint payload");
  try {
    c.config();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config unreadable: ") + e.what());
  }
  return c;
}

/// Copies checkpoint parameters into `model`; the configs and data shapes must agree.
template <class T>
void restore_checkpoint(RecDiffModel<T>& model, const Checkpoint& c) {
  if (config_hash(c.config_text) != config_hash(model.config().to_text()))
    throw DataError("checkpoint was written under a different model config");
  if (c.num_users != model.num_users() || c.num_items != model.num_items())
    throw DataError("checkpoint data shape " + std::to_string(c.num_users) + "x" + std::to_string(c.num_items) +
                    " does not match the dataset " + std::to_string(model.num_users()) + "x" +
                    std::to_string(model.num_items()));
  ParamStore<T> cast;
  for (const auto& [name, t] : c.params) cast.add(name, t.template cast<T>());
  model.load_params(cast);
}

}  // namespace recdiff
