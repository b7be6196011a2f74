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

// Adam and gradient clipping.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lyricmood/tensor.hpp"

namespace lyricmood::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of `param` in place; `step` is the 1-based
// step count after increment. Throws ShapeError when sizes disagree.
void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& state,
                 long step, const AdamOptions& opts);

// Adam over a fixed list of parameters. Row-sparse parameters only update
// the rows touched since the last zero_grad (lazy Adam). Updated values are
// rounded to single precision.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions opts);

  void step();
  void zero_grad();

  long steps() const { return t_; }
  const AdamOptions& options() const { return opts_; }
  const std::vector<AdamMoments>& moments() const { return state_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamMoments> state_;
  AdamOptions opts_;
  long t_ = 0;
};

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace lyricmood::nn
