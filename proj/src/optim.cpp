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

#include "lyricmood/optim.hpp"

#include <cmath>
#include <string>

#include "lyricmood/error.hpp"
#include "lyricmood/layers.hpp"

namespace lyricmood::nn {

namespace {

void adam_range(double* p, const double* g, double* m, double* v, std::size_t n, double lr_t,
                const AdamOptions& o, double bc2_sqrt) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
    p[i] -= lr_t * m[i] / (std::sqrt(v[i]) / bc2_sqrt + o.eps);
  }
}

}  // namespace

void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& state,
                 long step, const AdamOptions& opts) {
  if (grad.size() != param.size()) {
    throw ShapeError("adam: parameter has " + std::to_string(param.size()) +
                     " values but gradient has " + std::to_string(grad.size()));
  }
  if (state.m.empty()) state.m.assign(param.size(), 0.0);
  if (state.v.empty()) state.v.assign(param.size(), 0.0);
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw ShapeError("adam: moment size does not match parameter");
  }
  if (step < 1) throw Error("adam: step count must be positive");
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
  adam_range(param.data(), grad.data(), state.m.data(), state.v.data(), param.size(),
             opts.lr / bc1, opts, std::sqrt(bc2));
}

Adam::Adam(std::vector<Tensor> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
  state_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    state_[i].m.assign(params_[i].numel(), 0.0);
    state_[i].v.assign(params_[i].numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const double lr_t = opts_.lr / bc1;
  const double bc2_sqrt = std::sqrt(bc2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Node& n = *params_[i].node();
    if (n.grad.empty()) continue;
    auto& st = state_[i];
    if (n.sparse_rows) {
      const std::size_t width = n.shape.size() > 1 ? n.value.size() / n.shape[0] : 1;
      for (std::size_t r : n.touched_rows) {
        const std::size_t off = r * width;
        adam_range(n.value.data() + off, n.grad.data() + off, st.m.data() + off, st.v.data() + off,
                   width, lr_t, opts_, bc2_sqrt);
        round_to_f32(std::span<double>(n.value.data() + off, width));
      }
    } else {
      adam_range(n.value.data(), n.grad.data(), st.m.data(), st.v.data(), n.value.size(), lr_t,
                 opts_, bc2_sqrt);
      round_to_f32(n.value);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

namespace {

// Calls f on every gradient span that may be non-zero.
template <typename F>
void for_each_grad(std::span<Tensor> params, F f) {
  for (auto& p : params) {
    Node& n = *p.node();
    if (n.grad.empty()) continue;
    if (n.sparse_rows) {
      const std::size_t width = n.shape.size() > 1 ? n.value.size() / n.shape[0] : 1;
      for (std::size_t r : n.touched_rows) f(std::span<double>(n.grad.data() + r * width, width));
    } else {
      f(std::span<double>(n.grad));
    }
  }
}

}  // namespace

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for_each_grad(params, [&](std::span<double> g) {
    for (double x : g) sq += x * x;
  });
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for_each_grad(params, [&](std::span<double> g) {
      for (double& x : g) x *= s;
    });
  }
  return norm;
}

}  // namespace lyricmood::nn
