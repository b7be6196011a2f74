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

// Binary checkpoints: a metadata map, a tensor manifest and an f32 payload.
//
//   "LMCK" u32 version
//   u32 n_meta   { str key, str value }*
//   u32 n_tensor { str name, u32 rank, u32 dims[rank] }*
//   f32 values of every tensor in manifest order
//
// Strings are a u32 byte length followed by the bytes; all integers and
// floats are little-endian.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lyricmood/layers.hpp"

namespace lyricmood::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<CheckpointTensor> tensors;
};

void save_checkpoint(std::ostream& out, const std::map<std::string, std::string>& metadata,
                     const ParameterSet& params);
void save_checkpoint_file(const std::string& path,
                          const std::map<std::string, std::string>& metadata,
                          const ParameterSet& params);

Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint_file(const std::string& path);

// Copies every tensor into the matching parameter or buffer. Names and
// shapes must agree one to one; anything else is a ShapeError.
void load_state(const Checkpoint& ck, ParameterSet& params);

}  // namespace lyricmood::nn
