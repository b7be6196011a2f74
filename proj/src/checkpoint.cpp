// Copyright 2026 The LyricMood Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lyricmood/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include "binio.hpp"
#include "lyricmood/error.hpp"

namespace lyricmood::nn {

namespace {

constexpr char kMagic[5] = "LMCK";
constexpr std::uint32_t kMaxString = 1u << 30;
constexpr std::uint32_t kMaxRank = 8;

void write_string(std::ostream& out, const std::string& s) {
  detail::write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const char* what) {
  const std::uint32_t n = detail::read_u32(in, what);
  if (n > kMaxString) throw ParseError(std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw ParseError(std::string("truncated data while reading ") + what);
  return s;
}

}  // namespace

void save_checkpoint(std::ostream& out, const std::map<std::string, std::string>& metadata,
                     const ParameterSet& params) {
  out.write(kMagic, 4);
  detail::write_u32(out, kCheckpointVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    write_string(out, k);
    write_string(out, v);
  }
  const auto state = params.state();
  detail::write_u32(out, static_cast<std::uint32_t>(state.size()));
  for (const auto& t : state) {
    write_string(out, t.name);
    detail::write_u32(out, static_cast<std::uint32_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) detail::write_u32(out, static_cast<std::uint32_t>(d));
  }
  std::vector<char> buf;
  for (const auto& t : state) {
    const auto& v = t.tensor.values();
    buf.resize(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v[i]));
      for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw Error("failed to write checkpoint");
}

void save_checkpoint_file(const std::string& path,
                          const std::map<std::string, std::string>& metadata,
                          const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_checkpoint(out, metadata, params);
}

Checkpoint read_checkpoint(std::istream& in) {
  detail::expect_magic(in, kMagic);
  const auto version = detail::read_u32(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw UnsupportedFormat("checkpoint version " + std::to_string(version) + " is not supported");
  }
  Checkpoint ck;
  const auto n_meta = detail::read_u32(in, "metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = read_string(in, "metadata key");
    ck.metadata[k] = read_string(in, "metadata value");
  }
  const auto n_tensor = detail::read_u32(in, "tensor count");
  for (std::uint32_t i = 0; i < n_tensor; ++i) {
    CheckpointTensor t;
    t.name = read_string(in, "tensor name");
    const auto rank = detail::read_u32(in, "tensor rank");
    if (rank == 0 || rank > kMaxRank) throw ParseError("tensor '" + t.name + "' has invalid rank");
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = detail::read_u32(in, "tensor extent");
      if (d == 0) throw ParseError("tensor '" + t.name + "' has a zero extent");
      t.shape.push_back(d);
    }
    ck.tensors.push_back(std::move(t));
  }
  std::vector<unsigned char> buf;
  for (auto& t : ck.tensors) {
    const std::size_t n = numel(t.shape);
    buf.resize(n * 4);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw ParseError("truncated payload for tensor '" + t.name + "'");
    }
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(buf[i * 4]) |
                                 (static_cast<std::uint32_t>(buf[i * 4 + 1]) << 8) |
                                 (static_cast<std::uint32_t>(buf[i * 4 + 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[i * 4 + 3]) << 24);
      t.values[i] = std::bit_cast<float>(bits);
    }
  }
  return ck;
}

Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

void load_state(const Checkpoint& ck, ParameterSet& params) {
  auto state = params.state();
  if (state.size() != ck.tensors.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                     " tensors, model expects " + std::to_string(state.size()));
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& src = ck.tensors[i];
    auto& dst = state[i];
    if (src.name != dst.name || src.shape != dst.tensor.shape()) {
      throw ShapeError("checkpoint tensor '" + src.name + "' " + shape_str(src.shape) +
                       " does not match model tensor '" + dst.name + "' " +
                       shape_str(dst.tensor.shape()));
    }
    auto& v = dst.tensor.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(src.values[k]);
  }
}

}  // namespace lyricmood::nn
