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

#include "lyricmood/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "lyricmood/error.hpp"

namespace lyricmood::nn {

namespace {

// Constant [B, width] mask: 1 where step t is inside sample b, else 0.
Tensor step_mask(const std::vector<std::size_t>& lengths, std::size_t t, std::size_t width) {
  std::vector<double> m(lengths.size() * width);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(b * width), width, t < lengths[b] ? 1.0 : 0.0);
  }
  return Tensor::from({lengths.size(), width}, std::move(m));
}

Tensor carry(const Tensor& prev, const Tensor& next, const Tensor& mask) {
  return add(prev, mul(mask, sub(next, prev)));
}

std::vector<Tensor> run_direction(const RecurrentCell& cell, const Tensor& projected,
                                  const std::vector<std::size_t>& lengths, std::size_t T,
                                  bool reverse, Tensor* last) {
  const std::size_t B = lengths.size();
  const std::size_t H = cell.hidden();
  const bool full = std::all_of(lengths.begin(), lengths.end(), [T](std::size_t l) { return l == T; });
  auto state = cell.initial_state(B);
  std::vector<Tensor> outputs(T);
  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = reverse ? T - 1 - k : k;
    auto next = cell.step(select_step(projected, t), state);
    if (!full) {
      Tensor mask = step_mask(lengths, t, H);
      next.h = carry(state.h, next.h, mask);
      if (cell.type() == CellType::kLstm) next.c = carry(state.c, next.c, mask);
    }
    state = std::move(next);
    outputs[t] = state.h;
  }
  *last = state.h;
  return outputs;
}

}  // namespace

void round_to_f32(std::span<double> values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

void ParameterSet::check_unique(const std::string& name) const {
  auto same = [&](const NamedTensor& n) { return n.name == name; };
  if (std::any_of(params_.begin(), params_.end(), same) ||
      std::any_of(buffers_.begin(), buffers_.end(), same)) {
    throw ShapeError("duplicate parameter name '" + name + "'");
  }
}

Tensor ParameterSet::add_parameter(std::string name, Tensor t) {
  check_unique(name);
  round_to_f32(t.data());
  t.set_requires_grad(true);
  params_.push_back({std::move(name), t});
  return t;
}

Tensor ParameterSet::add_buffer(std::string name, Tensor t) {
  check_unique(name);
  round_to_f32(t.data());
  t.set_requires_grad(false);
  buffers_.push_back({std::move(name), t});
  return t;
}

std::vector<NamedTensor> ParameterSet::state() const {
  std::vector<NamedTensor> all = params_;
  all.insert(all.end(), buffers_.begin(), buffers_.end());
  return all;
}

std::vector<Tensor> ParameterSet::trainable() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) {
    if (p.tensor.requires_grad()) out.push_back(p.tensor);
  }
  return out;
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

ParameterSet::Snapshot ParameterSet::snapshot() const {
  Snapshot snap;
  for (const auto& t : state()) snap.push_back(t.tensor.values());
  return snap;
}

void ParameterSet::restore(const Snapshot& snap) {
  auto all = state();
  if (snap.size() != all.size()) throw ShapeError("snapshot does not match parameter set");
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (snap[i].size() != all[i].tensor.numel()) {
      throw ShapeError("snapshot entry '" + all[i].name + "' has the wrong size");
    }
    std::copy(snap[i].begin(), snap[i].end(), all[i].tensor.values().begin());
  }
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(-limit, limit);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
  const std::size_t big = std::max(rows, cols), small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  // Sign fix makes the distribution uniform over orthogonal matrices.
  Eigen::MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  std::vector<double> v(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      v[i * cols + j] = rows >= cols ? q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                                     : q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  return Tensor::from({rows, cols}, std::move(v));
}

Dense::Dense(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
             bool zero_init) {
  weight = ps.add_parameter(name + ".weight",
                            zero_init ? Tensor::zeros({in, out}) : glorot_uniform({in, out}, in, out, rng));
  bias = ps.add_parameter(name + ".bias", Tensor::zeros({out}));
}

RecurrentCell::RecurrentCell(ParameterSet& ps, const std::string& name, CellType type,
                             std::size_t input, std::size_t hidden, Rng& rng)
    : type_(type), hidden_(hidden) {
  const std::size_t g = gates();
  input_kernel = ps.add_parameter(name + ".input_kernel",
                                  glorot_uniform({input, g * hidden}, input, g * hidden, rng));
  if (type == CellType::kLstm) {
    // Orthogonal per gate block.
    std::vector<double> u(hidden * 4 * hidden);
    for (std::size_t gate = 0; gate < 4; ++gate) {
      Tensor block = orthogonal(hidden, hidden, rng);
      for (std::size_t i = 0; i < hidden; ++i) {
        for (std::size_t j = 0; j < hidden; ++j) {
          u[i * 4 * hidden + gate * hidden + j] = block.values()[i * hidden + j];
        }
      }
    }
    recurrent_kernel = ps.add_parameter(name + ".recurrent_kernel",
                                        Tensor::from({hidden, 4 * hidden}, std::move(u)));
    std::vector<double> b(4 * hidden, 0.0);
    std::fill_n(b.begin() + static_cast<std::ptrdiff_t>(hidden), hidden, 1.0);
    bias = ps.add_parameter(name + ".bias", Tensor::from({4 * hidden}, std::move(b)));
  } else {
    std::vector<double> u(hidden * 2 * hidden);
    for (std::size_t gate = 0; gate < 2; ++gate) {
      Tensor block = orthogonal(hidden, hidden, rng);
      for (std::size_t i = 0; i < hidden; ++i) {
        for (std::size_t j = 0; j < hidden; ++j) {
          u[i * 2 * hidden + gate * hidden + j] = block.values()[i * hidden + j];
        }
      }
    }
    recurrent_kernel = ps.add_parameter(name + ".recurrent_kernel",
                                        Tensor::from({hidden, 2 * hidden}, std::move(u)));
    recurrent_new = ps.add_parameter(name + ".recurrent_new", orthogonal(hidden, hidden, rng));
    bias = ps.add_parameter(name + ".bias", Tensor::zeros({3 * hidden}));
  }
}

RecurrentCell::State RecurrentCell::initial_state(std::size_t batch) const {
  State s;
  s.h = Tensor::zeros({batch, hidden_});
  if (type_ == CellType::kLstm) s.c = Tensor::zeros({batch, hidden_});
  return s;
}

RecurrentCell::State RecurrentCell::step(const Tensor& projected, const State& prev) const {
  const std::size_t H = hidden_;
  if (projected.rank() != 2 || projected.dim(1) != gates() * H) {
    throw ShapeError("recurrent step: projected input " + shape_str(projected.shape()) +
                     " does not match " + std::to_string(gates()) + " gates of " + std::to_string(H));
  }
  if (prev.h.shape() != Shape{projected.dim(0), H}) {
    throw ShapeError("recurrent step: state " + shape_str(prev.h.shape()) + " vs input " +
                     shape_str(projected.shape()));
  }
  State next;
  if (type_ == CellType::kLstm) {
    Tensor z = add(projected, matmul(prev.h, recurrent_kernel));
    Tensor i = sigmoid(slice_last(z, 0, H));
    Tensor f = sigmoid(slice_last(z, H, H));
    Tensor g = nn::tanh(slice_last(z, 2 * H, H));
    Tensor o = sigmoid(slice_last(z, 3 * H, H));
    next.c = add(mul(f, prev.c), mul(i, g));
    next.h = mul(o, nn::tanh(next.c));
    return next;
  }
  Tensor zr = add(slice_last(projected, 0, 2 * H), matmul(prev.h, recurrent_kernel));
  Tensor update = sigmoid(slice_last(zr, 0, H));
  Tensor reset = sigmoid(slice_last(zr, H, H));
  Tensor candidate = nn::tanh(add(slice_last(projected, 2 * H, H), matmul(mul(reset, prev.h), recurrent_new)));
  // h' = n + z * (h - n)
  next.h = add(candidate, mul(update, sub(prev.h, candidate)));
  return next;
}

Rnn::Rnn(ParameterSet& ps, const std::string& name, CellType type, std::size_t input,
         std::size_t hidden, bool bidirectional, Rng& rng)
    : hidden_(hidden), bidirectional_(bidirectional) {
  forward_cell = RecurrentCell(ps, name + ".fwd", type, input, hidden, rng);
  if (bidirectional) backward_cell = RecurrentCell(ps, name + ".bwd", type, input, hidden, rng);
}

RnnOutput Rnn::operator()(const Tensor& seq, const std::vector<std::size_t>& lengths) const {
  if (seq.rank() != 3) throw ShapeError("rnn: expected [B,T,d], got " + shape_str(seq.shape()));
  const std::size_t B = seq.dim(0), T = seq.dim(1), D = seq.dim(2);
  if (lengths.size() != B) throw ShapeError("rnn: lengths do not match batch");
  Tensor flat = reshape(seq, {B * T, D});
  const std::size_t G = forward_cell.gates() * hidden_;
  RnnOutput out;
  Tensor fwd_last;
  Tensor fwd_proj = reshape(forward_cell.project_input(flat), {B, T, G});
  auto fwd = run_direction(forward_cell, fwd_proj, lengths, T, false, &fwd_last);
  if (!bidirectional_) {
    out.sequence = stack_steps(fwd);
    out.last = fwd_last;
    return out;
  }
  Tensor bwd_last;
  Tensor bwd_proj = reshape(backward_cell.project_input(flat), {B, T, G});
  auto bwd = run_direction(backward_cell, bwd_proj, lengths, T, true, &bwd_last);
  std::vector<Tensor> steps(T);
  for (std::size_t t = 0; t < T; ++t) steps[t] = concat_last({fwd[t], bwd[t]});
  out.sequence = stack_steps(steps);
  out.last = concat_last({fwd_last, bwd_last});
  return out;
}

Attention::Attention(ParameterSet& ps, const std::string& name, std::size_t hidden, Rng& rng) {
  context = ps.add_parameter(name + ".context", glorot_uniform({hidden, 1}, hidden, 1, rng));
}

Tensor Attention::weights(const Tensor& seq, const std::vector<std::size_t>& lengths) const {
  if (seq.rank() != 3) throw ShapeError("attention: expected [B,T,h], got " + shape_str(seq.shape()));
  const std::size_t B = seq.dim(0), T = seq.dim(1), H = seq.dim(2);
  if (context.dim(0) != H) {
    throw ShapeError("attention: context " + shape_str(context.shape()) + " vs states " +
                     shape_str(seq.shape()));
  }
  Tensor m = nn::tanh(reshape(seq, {B * T, H}));
  Tensor scores = reshape(matmul(m, context), {B, T});
  if (!lengths.empty()) {
    std::vector<double> bias(B * T, 0.0);
    bool any = false;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = std::max<std::size_t>(lengths[b], 1); t < T; ++t) {
        bias[b * T + t] = -1e30;
        any = true;
      }
    }
    if (any) scores = add(scores, Tensor::from({B, T}, std::move(bias)));
  }
  return softmax(scores);
}

Tensor Attention::operator()(const Tensor& seq, const std::vector<std::size_t>& lengths) const {
  return nn::tanh(weighted_step_sum(seq, weights(seq, lengths)));
}

Conv2d::Conv2d(ParameterSet& ps, const std::string& name, std::size_t in_channels,
               std::size_t out_channels, std::size_t k, Rng& rng) {
  kernel = ps.add_parameter(name + ".kernel",
                            glorot_uniform({out_channels, in_channels, k, k}, in_channels * k * k,
                                           out_channels * k * k, rng));
}

BatchNorm::BatchNorm(ParameterSet& ps, const std::string& name, std::size_t features, std::size_t axis)
    : axis_(axis) {
  gamma = ps.add_parameter(name + ".gamma", Tensor::filled({features}, 1.0));
  beta = ps.add_parameter(name + ".beta", Tensor::zeros({features}));
  running_mean = ps.add_buffer(name + ".running_mean", Tensor::zeros({features}));
  running_var = ps.add_buffer(name + ".running_var", Tensor::filled({features}, 1.0));
}

Tensor BatchNorm::operator()(const Tensor& x, bool training) {
  if (!training) {
    return batch_norm_eval(x, gamma, beta, axis_, running_mean.data(), running_var.data(), kEps);
  }
  BatchMoments moments;
  Tensor y = batch_norm_train(x, gamma, beta, axis_, kEps, &moments);
  update_running(moments);
  return y;
}

void BatchNorm::update_running(const BatchMoments& moments) {
  auto rm = running_mean.data();
  auto rv = running_var.data();
  if (moments.mean.size() != rm.size() || moments.var.size() != rv.size()) {
    throw ShapeError("batch norm: moments do not match the running statistics");
  }
  for (std::size_t k = 0; k < rm.size(); ++k) {
    rm[k] = kMomentum * rm[k] + (1.0 - kMomentum) * moments.mean[k];
    rv[k] = kMomentum * rv[k] + (1.0 - kMomentum) * moments.var[k];
  }
  round_to_f32(rm);
  round_to_f32(rv);
}

Tensor conv_block(const Tensor& x, const Conv2d& conv, BatchNorm& norm, std::size_t pool_f,
                  std::size_t pool_t, bool training) {
  if (x.rank() != 4) throw ShapeError("conv block: expected [B,C,F,T], got " + shape_str(x.shape()));
  ConvBlockNorm opts;
  opts.training = training;
  opts.eps = BatchNorm::kEps;
  BatchMoments moments;
  if (training) {
    opts.moments = &moments;
  } else {
    opts.running_mean = norm.running_mean.data();
    opts.running_var = norm.running_var.data();
  }
  Tensor y = nn::conv_block(x, conv.kernel, norm.gamma, norm.beta, std::min(pool_f, x.dim(2)),
                            std::min(pool_t, x.dim(3)), opts);
  if (training) norm.update_running(moments);
  return y;
}

}  // namespace lyricmood::nn
