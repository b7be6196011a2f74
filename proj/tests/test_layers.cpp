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

#include <gtest/gtest.h>

#include <cmath>

#include "lyricmood/error.hpp"
#include "support/gradcheck.hpp"

namespace lyricmood::nn {
namespace {

using testing::grad_check;
using testing::random_tensor;

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar reference cell over one sample; w is [rows, cols] row-major.
struct RefCell {
  const RecurrentCell& cell;

  double w(const Tensor& t, std::size_t i, std::size_t j) const { return t.values()[i * t.dim(1) + j]; }

  void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
    const std::size_t H = cell.hidden(), G = cell.gates() * H, D = x.size();
    std::vector<double> pre(G);
    for (std::size_t j = 0; j < G; ++j) {
      double acc = cell.bias.values()[j];
      for (std::size_t k = 0; k < D; ++k) acc += x[k] * w(cell.input_kernel, k, j);
      pre[j] = acc;
    }
    std::vector<double> nh(H), nc(H);
    if (cell.type() == CellType::kLstm) {
      for (std::size_t j = 0; j < 4 * H; ++j)
        for (std::size_t k = 0; k < H; ++k) pre[j] += h[k] * w(cell.recurrent_kernel, k, j);
      for (std::size_t u = 0; u < H; ++u) {
        const double i = sigm(pre[u]), f = sigm(pre[H + u]), g = std::tanh(pre[2 * H + u]),
                     o = sigm(pre[3 * H + u]);
        nc[u] = f * c[u] + i * g;
        nh[u] = o * std::tanh(nc[u]);
      }
      c = nc;
    } else {
      std::vector<double> z(H), r(H);
      for (std::size_t u = 0; u < H; ++u) {
        double az = pre[u], ar = pre[H + u];
        for (std::size_t k = 0; k < H; ++k) {
          az += h[k] * w(cell.recurrent_kernel, k, u);
          ar += h[k] * w(cell.recurrent_kernel, k, H + u);
        }
        z[u] = sigm(az);
        r[u] = sigm(ar);
      }
      for (std::size_t u = 0; u < H; ++u) {
        double an = pre[2 * H + u];
        for (std::size_t k = 0; k < H; ++k) an += r[k] * h[k] * w(cell.recurrent_new, k, u);
        const double n = std::tanh(an);
        nh[u] = (1 - z[u]) * n + z[u] * h[u];
      }
    }
    h = nh;
  }

  // Hidden state after every step of xs, in the order given.
  std::vector<std::vector<double>> run(const std::vector<std::vector<double>>& xs) const {
    std::vector<double> h(cell.hidden(), 0.0), c(cell.hidden(), 0.0);
    std::vector<std::vector<double>> out;
    for (const auto& x : xs) {
      step(x, h, c);
      out.push_back(h);
    }
    return out;
  }
};

std::vector<double> row(const Tensor& seq, std::size_t b, std::size_t t) {
  const std::size_t T = seq.dim(1), D = seq.dim(2);
  auto p = seq.values().begin() + static_cast<std::ptrdiff_t>((b * T + t) * D);
  return {p, p + static_cast<std::ptrdiff_t>(D)};
}

void check_against_reference(CellType type) {
  Rng rng(31);
  ParameterSet ps;
  Rnn rnn(ps, "rnn", type, 5, 4, true, rng);
  auto x = random_tensor({3, 6, 5}, rng, -1, 1, false);
  std::vector<std::size_t> len{6, 3, 1};
  auto out = rnn(x, len);
  ASSERT_EQ(out.sequence.shape(), (Shape{3, 6, 8}));
  ASSERT_EQ(out.last.shape(), (Shape{3, 8}));
  for (std::size_t b = 0; b < 3; ++b) {
    std::vector<std::vector<double>> xs;
    for (std::size_t t = 0; t < len[b]; ++t) xs.push_back(row(x, b, t));
    auto fwd = RefCell{rnn.forward_cell}.run(xs);
    std::reverse(xs.begin(), xs.end());
    auto bwd = RefCell{rnn.backward_cell}.run(xs);
    for (std::size_t t = 0; t < 6; ++t) {
      auto got = row(out.sequence, b, t);
      for (std::size_t u = 0; u < 4; ++u) {
        const double f = fwd[std::min(t, len[b] - 1)][u];
        const double r = t < len[b] ? bwd[len[b] - 1 - t][u] : 0.0;
        EXPECT_NEAR(got[u], f, 1e-12) << b << "," << t;
        EXPECT_NEAR(got[4 + u], r, 1e-12) << b << "," << t;
      }
    }
    for (std::size_t u = 0; u < 4; ++u) {
      EXPECT_NEAR(out.last.values()[b * 8 + u], fwd.back()[u], 1e-12);
      EXPECT_NEAR(out.last.values()[b * 8 + 4 + u], bwd.back()[u], 1e-12);
    }
  }
}

TEST(Rnn, LstmMatchesScalarReference) { check_against_reference(CellType::kLstm); }
TEST(Rnn, GruMatchesScalarReference) { check_against_reference(CellType::kGru); }

TEST(Rnn, PaddingContentIsIgnored) {
  Rng rng(32);
  ParameterSet ps;
  Rnn rnn(ps, "rnn", CellType::kLstm, 3, 5, true, rng);
  auto x = random_tensor({2, 7, 3}, rng, -1, 1, false);
  std::vector<std::size_t> len{4, 2};
  auto a = rnn(x, len);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = len[b]; t < 7; ++t)
      for (std::size_t d = 0; d < 3; ++d) x.values()[(b * 7 + t) * 3 + d] = 100.0 + static_cast<double>(t);
  auto b = rnn(x, len);
  EXPECT_EQ(a.sequence.values(), b.sequence.values());
  EXPECT_EQ(a.last.values(), b.last.values());
}

TEST(Rnn, InitialisationFacts) {
  Rng rng(33);
  ParameterSet ps;
  RecurrentCell lstm(ps, "l", CellType::kLstm, 6, 4, rng);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(lstm.bias.values()[j], j >= 4 && j < 8 ? 1.0 : 0.0);
  // Each 4x4 gate block of the recurrent kernel is orthogonal.
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k)
          s += lstm.recurrent_kernel.values()[k * 16 + g * 4 + i] * lstm.recurrent_kernel.values()[k * 16 + g * 4 + j];
        EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-6);
      }
  const double limit = std::sqrt(6.0 / (6 + 16));
  for (double v : lstm.input_kernel.values()) EXPECT_LE(std::abs(v), limit);
  for (double v : lstm.input_kernel.values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  EXPECT_THROW(ps.add_parameter("l.bias", Tensor::zeros({1})), ShapeError);
}

TEST(Orthogonal, RowsOrColumns) {
  Rng rng(34);
  auto tall = orthogonal(6, 3, rng);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 6; ++k) s += tall.values()[k * 3 + i] * tall.values()[k * 3 + j];
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
    }
  auto wide = orthogonal(2, 5, rng);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += wide.values()[i * 5 + k] * wide.values()[j * 5 + k];
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Attention, WeightsMaskedAndNormalised) {
  Rng rng(35);
  ParameterSet ps;
  Attention att(ps, "att", 4, rng);
  auto h = random_tensor({2, 5, 4}, rng, -1, 1, false);
  std::vector<std::size_t> len{5, 2};
  auto a = att.weights(h, len);
  for (std::size_t b = 0; b < 2; ++b) {
    double s = 0;
    for (std::size_t t = 0; t < 5; ++t) {
      const double v = a.values()[b * 5 + t];
      if (t >= len[b]) {
        EXPECT_EQ(v, 0.0);
      }
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
  // Direct formula for sample 1.
  std::vector<double> score(2);
  for (std::size_t t = 0; t < 2; ++t) {
    double acc = 0;
    for (std::size_t d = 0; d < 4; ++d) acc += std::tanh(h.values()[(5 + t) * 4 + d]) * att.context.values()[d];
    score[t] = acc;
  }
  const double z = std::exp(score[0]) + std::exp(score[1]);
  auto r = att(h, len);
  for (std::size_t d = 0; d < 4; ++d) {
    const double ctx = (std::exp(score[0]) * h.values()[5 * 4 + d] + std::exp(score[1]) * h.values()[6 * 4 + d]) / z;
    EXPECT_NEAR(r.values()[4 + d], std::tanh(ctx), 1e-13);
  }
}

TEST(Attention, SingletonAndConstantSequences) {
  Rng rng(40);
  ParameterSet ps;
  Attention att(ps, "att", 3, rng);
  auto one = random_tensor({1, 1, 3}, rng, -1, 1, false);
  auto r1 = att(one, {1});
  for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(r1.values()[d], std::tanh(one.values()[d]), 1e-15);
  std::vector<double> step{0.3, -0.8, 0.1};
  for (std::size_t T : {2u, 5u, 9u}) {
    std::vector<double> v;
    for (std::size_t t = 0; t < T; ++t) v.insert(v.end(), step.begin(), step.end());
    auto r = att(Tensor::from({1, T, 3}, v), {T});
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(r.values()[d], std::tanh(step[d]), 1e-14);
  }
}

TEST(BatchNormLayer, RunningStatistics) {
  ParameterSet ps;
  BatchNorm bn(ps, "bn", 2, 1);
  auto x = Tensor::from({2, 2}, {1.0, 10.0, 3.0, 30.0});
  bn(x, true);
  EXPECT_NEAR(bn.running_mean.values()[0], 0.1 * 2.0, 1e-7);
  EXPECT_NEAR(bn.running_mean.values()[1], 0.1 * 20.0, 1e-6);
  EXPECT_NEAR(bn.running_var.values()[0], 0.9 + 0.1 * 1.0, 1e-7);
  EXPECT_NEAR(bn.running_var.values()[1], 0.9 + 0.1 * 100.0, 1e-6);
  auto before = bn.running_mean.values();
  bn(x, false);
  EXPECT_EQ(bn.running_mean.values(), before);
  EXPECT_EQ(ps.buffers().size(), 2u);
  EXPECT_EQ(ps.parameter_count(), 4u);
}

TEST(ConvBlockLayer, PoolShrinksToMap) {
  Rng rng(36);
  ParameterSet ps;
  Conv2d conv(ps, "c", 1, 2, 3, rng);
  BatchNorm bn(ps, "bn", 2, 1);
  auto x = random_tensor({2, 1, 3, 8}, rng, -1, 1, false);
  auto y = conv_block(x, conv, bn, 5, 2, true);
  EXPECT_EQ(y.shape(), (Shape{2, 2, 1, 4}));
}

TEST(ParameterSet, SnapshotRestore) {
  Rng rng(37);
  ParameterSet ps;
  Dense d(ps, "d", 3, 2, rng);
  auto snap = ps.snapshot();
  d.weight.values()[0] += 1.0;
  ps.restore(snap);
  EXPECT_EQ(d.weight.values(), snap[0]);
  Dense z(ps, "z", 3, 2, rng, true);
  for (double v : z.weight.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(ps.state().size(), 4u);
}

TEST(GradCheck, RecurrentLayers) {
  for (auto type : {CellType::kLstm, CellType::kGru}) {
    Rng rng(38);
    ParameterSet ps;
    Rnn rnn(ps, "rnn", type, 3, 4, true, rng);
    auto x = random_tensor({2, 5, 3}, rng);
    std::vector<std::size_t> len{5, 3};
    Rng coeff(1);
    auto w1 = random_tensor({2, 5, 8}, coeff, -1, 1, false);
    auto w2 = random_tensor({2, 8}, coeff, -1, 1, false);
    auto f = [&] {
      auto o = rnn(x, len);
      return add(dot(o.sequence, w1), dot(o.last, w2));
    };
    auto inputs = ps.trainable();
    inputs.push_back(x);
    auto r = grad_check(f, inputs);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  }
}

TEST(GradCheck, AttentionLayer) {
  Rng rng(39);
  ParameterSet ps;
  Attention att(ps, "att", 4, rng);
  auto h = random_tensor({3, 5, 4}, rng);
  std::vector<std::size_t> len{5, 2, 4};
  Rng coeff(2);
  auto w = random_tensor({3, 4}, coeff, -1, 1, false);
  auto r = grad_check([&] { return dot(att(h, len), w); }, {h, att.context});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

}  // namespace
}  // namespace lyricmood::nn
