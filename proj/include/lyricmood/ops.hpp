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

// Differentiable operations over nn::Tensor. Shapes are checked eagerly and
// mismatches raise ShapeError naming both shapes.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lyricmood/random.hpp"
#include "lyricmood/tensor.hpp"

namespace lyricmood::nn {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// x[..., n] + b[n]
Tensor add_bias(const Tensor& x, const Tensor& b);

// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// x[B,in] W[in,out] + b[out]
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);  // alpha = 1
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Over the last axis.
Tensor softmax(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);  // sum(a * b)

Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten(const Tensor& x);  // [B, ...] -> [B, rest]

// Columns [start, start + len) of the last axis.
Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len);
Tensor concat_last(const std::vector<Tensor>& parts);

// Sequence helpers for [B,T,d] tensors.
Tensor select_step(const Tensor& seq, std::size_t t);
Tensor stack_steps(const std::vector<Tensor>& steps);
Tensor weighted_step_sum(const Tensor& seq, const Tensor& weights);  // [B,T,h],[B,T] -> [B,h]
// Valid steps of [B,T,d] gathered into [sum(lengths), d], and back (padding
// becomes zero).
Tensor pack_steps(const Tensor& seq, const std::vector<std::size_t>& lengths);
Tensor unpack_steps(const Tensor& packed, const std::vector<std::size_t>& lengths, std::size_t T);

// Row r of the result is the mean of table rows bags[r]; an empty bag gives
// a zero row. Gradient is scattered back to the table.
Tensor embedding_bag_mean(const Tensor& table, const std::vector<std::vector<std::size_t>>& bags);

// x[B,C,F,T] * k[C',C,kh,kw] with zero "same" padding; kh and kw odd.
Tensor conv2d(const Tensor& x, const Tensor& kernel);

struct BatchMoments {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};

struct ConvBlockNorm {
  bool training = true;
  double eps = 1e-5;
  BatchMoments* moments = nullptr;       // filled at train time when set
  std::span<const double> running_mean;  // used at inference time
  std::span<const double> running_var;
};

// conv2d -> per-channel batch norm -> ELU -> maxpool in a single node. Only
// the convolution output is kept for the backward pass, which matters for
// the large early feature maps of the audio model.
Tensor conv_block(const Tensor& x, const Tensor& kernel, const Tensor& gamma, const Tensor& beta,
                  std::size_t pool_f, std::size_t pool_t, const ConvBlockNorm& norm);

// Non-overlapping max pooling over the last two axes; trailing rows/columns
// that do not fill a window are dropped.
Tensor maxpool2d(const Tensor& x, std::size_t pool_f, std::size_t pool_t);

// Normalizes each index of `axis` over all other axes using the batch
// statistics, then applies gamma/beta. The batch moments are returned
// through `moments` when non-null.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        std::size_t axis, double eps, BatchMoments* moments = nullptr);

// Same normalization with fixed statistics.
Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       std::size_t axis, std::span<const double> mean,
                       std::span<const double> var, double eps);

// Inverted dropout: at train time each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate). Identity when !training.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

// Categorical cross-entropy of softmax(logits) against integer labels,
// (1/N) sum_n w_n * -log softmax(logits_n)[label_n]. Empty weights mean 1.
// Throws NumericError on non-finite logits.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels,
                     std::span<const double> weights = {});

// Same loss against a target distribution per row (one-hot in practice).
Tensor cross_entropy(const Tensor& logits, const Tensor& targets,
                     std::span<const double> weights = {});

}  // namespace lyricmood::nn
