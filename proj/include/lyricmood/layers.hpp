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

// Trainable building blocks on top of the differentiable ops.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lyricmood/ops.hpp"
#include "lyricmood/random.hpp"
#include "lyricmood/tensor.hpp"

namespace lyricmood::nn {

// Parameters are held at single precision: every stored value is exactly
// representable as a float, while arithmetic runs in double.
void round_to_f32(std::span<double> values);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered registry of a model's trainable parameters and non-trainable
// buffers (batch-norm running statistics). Names are unique.
class ParameterSet {
 public:
  Tensor add_parameter(std::string name, Tensor t);
  Tensor add_buffer(std::string name, Tensor t);

  const std::vector<NamedTensor>& parameters() const { return params_; }
  const std::vector<NamedTensor>& buffers() const { return buffers_; }

  // Parameters followed by buffers, the order used by checkpoints.
  std::vector<NamedTensor> state() const;

  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;

  using Snapshot = std::vector<std::vector<double>>;
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

 private:
  void check_unique(const std::string& name) const;

  std::vector<NamedTensor> params_;
  std::vector<NamedTensor> buffers_;
};

// Uniform(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// rows x cols matrix with orthonormal rows or columns (whichever is fewer).
Tensor orthogonal(std::size_t rows, std::size_t cols, Rng& rng);

class Dense {
 public:
  Dense() = default;
  // zero_init leaves the kernel at zero, used for classifier outputs so an
  // untrained model predicts the uniform distribution.
  Dense(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
        bool zero_init = false);

  Tensor operator()(const Tensor& x) const { return dense(x, weight, bias); }

  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

enum class CellType { kLstm, kGru };

// LSTM gate order i, f, g, o with forget-gate bias 1. GRU gate order z, r, n
// with the reset gate applied before the recurrent product:
//   n = tanh(x Wn + (r * h) Un + bn),  h' = (1 - z) * n + z * h.
class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(ParameterSet& ps, const std::string& name, CellType type, std::size_t input,
                std::size_t hidden, Rng& rng);

  struct State {
    Tensor h;
    Tensor c;  // LSTM only
  };

  CellType type() const { return type_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t gates() const { return type_ == CellType::kLstm ? 4 : 3; }

  // x W + b for a whole [N, input] block of steps -> [N, gates * hidden].
  Tensor project_input(const Tensor& x) const { return dense(x, input_kernel, bias); }

  // One step from a pre-projected input row block [B, gates * hidden].
  State step(const Tensor& projected, const State& prev) const;

  State initial_state(std::size_t batch) const;

  Tensor input_kernel;      // [input, gates*hidden]
  Tensor recurrent_kernel;  // LSTM [hidden, 4h]; GRU z/r part [hidden, 2h]
  Tensor recurrent_new;     // GRU candidate part [hidden, hidden]
  Tensor bias;              // [gates*hidden]

 private:
  CellType type_ = CellType::kLstm;
  std::size_t hidden_ = 0;
};

struct RnnOutput {
  Tensor sequence;  // [B, T, h] or [B, T, 2h]
  Tensor last;      // final state per sample, [B, h] or [B, 2h]
};

// Unrolls one or two cells over [B, T, d]. Steps at or beyond a sample's
// length carry the previous state unchanged, so padding never leaks into
// either direction. The backward direction reads the sequence reversed and
// its outputs are written back at their original positions.
class Rnn {
 public:
  Rnn() = default;
  Rnn(ParameterSet& ps, const std::string& name, CellType type, std::size_t input,
      std::size_t hidden, bool bidirectional, Rng& rng);

  RnnOutput operator()(const Tensor& seq, const std::vector<std::size_t>& lengths) const;

  std::size_t output_size() const { return bidirectional_ ? 2 * hidden_ : hidden_; }
  bool bidirectional() const { return bidirectional_; }

  RecurrentCell forward_cell;
  RecurrentCell backward_cell;

 private:
  std::size_t hidden_ = 0;
  bool bidirectional_ = false;
};

// M = tanh(H); a = softmax_t(M w); r = sum_t a_t H_t; output tanh(r).
// Steps at or beyond a sample's length get zero weight.
class Attention {
 public:
  Attention() = default;
  Attention(ParameterSet& ps, const std::string& name, std::size_t hidden, Rng& rng);

  Tensor operator()(const Tensor& seq, const std::vector<std::size_t>& lengths) const;

  // Attention weights [B, T] of the last call, for inspection.
  Tensor weights(const Tensor& seq, const std::vector<std::size_t>& lengths) const;

  Tensor context;  // w, [h, 1]
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterSet& ps, const std::string& name, std::size_t in_channels,
         std::size_t out_channels, std::size_t kernel, Rng& rng);

  Tensor operator()(const Tensor& x) const { return conv2d(x, kernel); }

  Tensor kernel;  // [out, in, k, k]
};

// Learned scale/shift per index of `axis`; running statistics updated with
// running = momentum * running + (1 - momentum) * batch at train time.
class BatchNorm {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  BatchNorm() = default;
  BatchNorm(ParameterSet& ps, const std::string& name, std::size_t features, std::size_t axis);

  Tensor operator()(const Tensor& x, bool training);

  // Folds batch moments into the running statistics.
  void update_running(const BatchMoments& moments);

  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

 private:
  std::size_t axis_ = 1;
};

// conv -> batch norm -> ELU -> maxpool as one fused node. Pools larger than
// the incoming map shrink to it.
Tensor conv_block(const Tensor& x, const Conv2d& conv, BatchNorm& norm, std::size_t pool_f,
                  std::size_t pool_t, bool training);

}  // namespace lyricmood::nn
