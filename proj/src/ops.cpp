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

#include "lyricmood/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Core>

#include "lyricmood/error.hpp"

namespace lyricmood::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

MapMat as_mat(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return MapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstMapMat as_mat(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return ConstMapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat as_mat(double* p, std::size_t rows, std::size_t cols) {
  return MapMat(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_str(x.shape()));
  }
}

// dy -> dx via df(x, y) elementwise.
template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df) {
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  auto xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), {xn}, op, [xn, df](Node& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      xn->grad[i] += self.grad[i] * df(xn->value[i], self.value[i]);
    }
  });
}

// Rows [f0, f1) of the im2col matrix: K = channels*kh*kw rows, each holding
// (f1 - f0) * T shifted input values with zero padding at the borders.
void im2col(const double* x, std::size_t channels, std::size_t F, std::size_t T, std::size_t kh,
            std::size_t kw, std::size_t f0, std::size_t f1, double* cols) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const std::size_t plane = F * T;
  const std::size_t width = (f1 - f0) * T;
  const auto sT = static_cast<std::ptrdiff_t>(T);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* xc = x + c * plane;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j, ++row) {
        double* dst = cols + row * width;
        const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(i) - ph;
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(j) - pw;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -dj);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(sT, sT - dj);
        for (std::size_t f = f0; f < f1; ++f) {
          double* d = dst + (f - f0) * T;
          const std::ptrdiff_t sf = static_cast<std::ptrdiff_t>(f) + di;
          if (sf < 0 || sf >= static_cast<std::ptrdiff_t>(F)) {
            std::fill_n(d, T, 0.0);
            continue;
          }
          const double* s = xc + static_cast<std::size_t>(sf) * T;
          std::fill(d, d + t0, 0.0);
          std::copy(s + t0 + dj, s + t1 + dj, d + t0);
          std::fill(d + std::max(t0, t1), d + T, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t channels, std::size_t F, std::size_t T,
                std::size_t kh, std::size_t kw, std::size_t f0, std::size_t f1, double* dx) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(kw / 2);
  const std::size_t plane = F * T;
  const std::size_t width = (f1 - f0) * T;
  const auto sT = static_cast<std::ptrdiff_t>(T);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    double* dc = dx + c * plane;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j, ++row) {
        const double* src = cols + row * width;
        const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(i) - ph;
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(j) - pw;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -dj);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(sT, sT - dj);
        for (std::size_t f = f0; f < f1; ++f) {
          const std::ptrdiff_t sf = static_cast<std::ptrdiff_t>(f) + di;
          if (sf < 0 || sf >= static_cast<std::ptrdiff_t>(F)) continue;
          const double* s = src + (f - f0) * T;
          double* d = dc + static_cast<std::size_t>(sf) * T;
          for (std::ptrdiff_t t = t0; t < t1; ++t) d[t + dj] += s[t];
        }
      }
    }
  }
}

struct AxisView {
  std::size_t outer, n, inner;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisView v{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make_result(a.shape(), std::move(out), {an, bn}, "add", [an, bn](Node& self) {
    for (auto* p : {an.get(), bn.get()}) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make_result(a.shape(), std::move(out), {an, bn}, "sub", [an, bn](Node& self) {
    if (an->requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make_result(a.shape(), std::move(out), {an, bn}, "mul", [an, bn](Node& self) {
    if (an->requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.rank() != 1 || x.shape().back() != b.dim(0)) shape_mismatch("add_bias", x.shape(), b.shape());
  const std::size_t n = b.dim(0);
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i % n];
  auto xn = x.node_ptr(), bn = b.node_ptr();
  return make_result(x.shape(), std::move(out), {xn, bn}, "add_bias", [xn, bn, n](Node& self) {
    if (xn->requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i % n] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  std::vector<double> out(M * N);
  as_mat(out, M, N).noalias() = as_mat(a.values(), M, K) * as_mat(b.values(), K, N);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make_result({M, N}, std::move(out), {an, bn}, "matmul", [an, bn, M, K, N](Node& self) {
    auto g = as_mat(self.grad, M, N);
    if (an->requires_grad) as_mat(an->grad, M, K).noalias() += g * as_mat(bn->value, K, N).transpose();
    if (bn->requires_grad) as_mat(bn->grad, K, N).noalias() += as_mat(an->value, M, K).transpose() * g;
  });
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("dense", x, 2);
  require_rank("dense", w, 2);
  if (x.dim(1) != w.dim(0)) shape_mismatch("dense", x.shape(), w.shape());
  if (b.rank() != 1 || b.dim(0) != w.dim(1)) shape_mismatch("dense", w.shape(), b.shape());
  const std::size_t B = x.dim(0), I = x.dim(1), O = w.dim(1);
  std::vector<double> out(B * O);
  auto o = as_mat(out, B, O);
  o.noalias() = as_mat(x.values(), B, I) * as_mat(w.values(), I, O);
  Eigen::Map<const Eigen::RowVectorXd> bias(b.values().data(), static_cast<Eigen::Index>(O));
  o.rowwise() += bias;
  auto xn = x.node_ptr(), wn = w.node_ptr(), bn = b.node_ptr();
  return make_result({B, O}, std::move(out), {xn, wn, bn}, "dense",
                     [xn, wn, bn, B, I, O](Node& self) {
                       auto g = as_mat(self.grad, B, O);
                       if (xn->requires_grad) {
                         as_mat(xn->grad, B, I).noalias() += g * as_mat(wn->value, I, O).transpose();
                       }
                       if (wn->requires_grad) {
                         as_mat(wn->grad, I, O).noalias() += as_mat(xn->value, B, I).transpose() * g;
                       }
                       if (bn->requires_grad) {
                         Eigen::Map<Eigen::RowVectorXd> gb(bn->grad.data(), static_cast<Eigen::Index>(O));
                         gb += g.colwise().sum();
                       }
                     });
}

Tensor relu(const Tensor& x) {
  return unary(x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& x) {
  // Vectorized through Eigen's packet exp; this runs on the largest maps of
  // the audio model.
  using Arr = Eigen::Array<double, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(x.numel());
  std::vector<double> out(x.numel());
  Eigen::Map<const Arr> xv(x.values().data(), n);
  Eigen::Map<Arr>(out.data(), n) = (xv > 0.0).select(xv, xv.min(0.0).exp() - 1.0);
  auto xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), {xn}, "elu", [xn, n](Node& self) {
    if (!xn->requires_grad) return;
    Eigen::Map<const Arr> xv(xn->value.data(), n), y(self.value.data(), n), g(self.grad.data(), n);
    Eigen::Map<Arr>(xn->grad.data(), n) += g * (xv > 0.0).select(Arr::Ones(n), y + 1.0);
  });
}

Tensor tanh(const Tensor& x) {
  return unary(x, "tanh", [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid",
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& x) {
  const std::size_t C = x.shape().back();
  const std::size_t rows = x.numel() / C;
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * C;
    double* o = out.data() + r * C;
    const double m = *std::max_element(in, in + C);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += (o[c] = std::exp(in[c] - m));
    for (std::size_t c = 0; c < C; ++c) o[c] /= z;
  }
  auto xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), {xn}, "softmax", [xn, C, rows](Node& self) {
    if (!xn->requires_grad) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * C;
      const double* g = self.grad.data() + r * C;
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += g[c] * y[c];
      for (std::size_t c = 0; c < C; ++c) xn->grad[r * C + c] += y[c] * (g[c] - s);
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
  auto xn = x.node_ptr();
  return make_result({1}, {s}, {xn}, "sum", [xn](Node& self) {
    if (!xn->requires_grad) return;
    for (double& g : xn->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) shape_mismatch("reshape", x.shape(), shape);
  auto xn = x.node_ptr();
  return make_result(std::move(shape), x.values(), {xn}, "reshape", [xn](Node& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("flatten: need rank >= 2, got " + shape_str(x.shape()));
  return reshape(x, {x.dim(0), x.numel() / x.dim(0)});
}

Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len) {
  const std::size_t D = x.shape().back();
  if (len == 0 || start + len > D) {
    throw ShapeError("slice_last: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / D;
  Shape shape = x.shape();
  shape.back() = len;
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.values().data() + r * D + start, len, out.data() + r * len);
  }
  auto xn = x.node_ptr();
  return make_result(std::move(shape), std::move(out), {xn}, "slice_last",
                     [xn, rows, D, start, len](Node& self) {
                       if (!xn->requires_grad) return;
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t k = 0; k < len; ++k) {
                           xn->grad[r * D + start + k] += self.grad[r * len + k];
                         }
                       }
                     });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  Shape shape = parts[0].shape();
  const std::size_t rows = parts[0].numel() / shape.back();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = shape;
    a.back() = b.back() = 0;
    if (a != b) shape_mismatch("concat_last", shape, p.shape());
    widths.push_back(p.shape().back());
    total += widths.back();
    nodes.push_back(p.node_ptr());
  }
  shape.back() = total;
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(parts[k].values().data() + r * widths[k], widths[k],
                  out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  auto captured = nodes;
  return make_result(std::move(shape), std::move(out), std::move(nodes), "concat_last",
                     [captured, widths, rows, total](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < captured.size(); ++k) {
                         if (captured[k]->requires_grad) {
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < widths[k]; ++c) {
                               captured[k]->grad[r * widths[k] + c] += self.grad[r * total + off + c];
                             }
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Tensor select_step(const Tensor& seq, std::size_t t) {
  require_rank("select_step", seq, 3);
  const std::size_t B = seq.dim(0), T = seq.dim(1), D = seq.dim(2);
  if (t >= T) throw ShapeError("select_step: step " + std::to_string(t) + " of " + shape_str(seq.shape()));
  std::vector<double> out(B * D);
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(seq.values().data() + (b * T + t) * D, D, out.data() + b * D);
  }
  auto sn = seq.node_ptr();
  return make_result({B, D}, std::move(out), {sn}, "select_step", [sn, B, T, D, t](Node& self) {
    if (!sn->requires_grad) return;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t d = 0; d < D; ++d) sn->grad[(b * T + t) * D + d] += self.grad[b * D + d];
    }
  });
}

Tensor pack_steps(const Tensor& seq, const std::vector<std::size_t>& lengths) {
  require_rank("pack_steps", seq, 3);
  const std::size_t B = seq.dim(0), T = seq.dim(1), D = seq.dim(2);
  if (lengths.size() != B) throw ShapeError("pack_steps: lengths do not match " + shape_str(seq.shape()));
  std::vector<std::size_t> src;
  for (std::size_t b = 0; b < B; ++b) {
    if (lengths[b] > T) throw ShapeError("pack_steps: length exceeds " + shape_str(seq.shape()));
    for (std::size_t t = 0; t < lengths[b]; ++t) src.push_back(b * T + t);
  }
  if (src.empty()) throw ShapeError("pack_steps: every sequence is empty");
  std::vector<double> out(src.size() * D);
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::copy_n(seq.values().data() + src[i] * D, D, out.data() + i * D);
  }
  auto sn = seq.node_ptr();
  return make_result({src.size(), D}, std::move(out), {sn}, "pack_steps", [sn, src, D](Node& self) {
    if (!sn->requires_grad) return;
    for (std::size_t i = 0; i < src.size(); ++i) {
      for (std::size_t d = 0; d < D; ++d) sn->grad[src[i] * D + d] += self.grad[i * D + d];
    }
  });
}

Tensor unpack_steps(const Tensor& packed, const std::vector<std::size_t>& lengths, std::size_t T) {
  require_rank("unpack_steps", packed, 2);
  const std::size_t B = lengths.size(), D = packed.dim(1);
  std::vector<std::size_t> dst;
  for (std::size_t b = 0; b < B; ++b) {
    if (lengths[b] > T) throw ShapeError("unpack_steps: length exceeds " + std::to_string(T));
    for (std::size_t t = 0; t < lengths[b]; ++t) dst.push_back(b * T + t);
  }
  if (dst.size() != packed.dim(0)) {
    throw ShapeError("unpack_steps: " + shape_str(packed.shape()) + " does not match the lengths");
  }
  std::vector<double> out(B * T * D, 0.0);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::copy_n(packed.values().data() + i * D, D, out.data() + dst[i] * D);
  }
  auto pn = packed.node_ptr();
  return make_result({B, T, D}, std::move(out), {pn}, "unpack_steps", [pn, dst, D](Node& self) {
    if (!pn->requires_grad) return;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      for (std::size_t d = 0; d < D; ++d) pn->grad[i * D + d] += self.grad[dst[i] * D + d];
    }
  });
}

Tensor stack_steps(const std::vector<Tensor>& steps) {
  if (steps.empty()) throw ShapeError("stack_steps: no inputs");
  const Shape& s0 = steps[0].shape();
  if (s0.size() != 2) throw ShapeError("stack_steps: steps must be [B,d], got " + shape_str(s0));
  const std::size_t B = s0[0], D = s0[1], T = steps.size();
  std::vector<double> out(B * T * D);
  std::vector<std::shared_ptr<Node>> nodes;
  for (std::size_t t = 0; t < T; ++t) {
    if (steps[t].shape() != s0) shape_mismatch("stack_steps", s0, steps[t].shape());
    for (std::size_t b = 0; b < B; ++b) {
      std::copy_n(steps[t].values().data() + b * D, D, out.data() + (b * T + t) * D);
    }
    nodes.push_back(steps[t].node_ptr());
  }
  auto captured = nodes;
  return make_result({B, T, D}, std::move(out), std::move(nodes), "stack_steps",
                     [captured, B, T, D](Node& self) {
                       for (std::size_t t = 0; t < T; ++t) {
                         auto& p = captured[t];
                         if (!p->requires_grad) continue;
                         for (std::size_t b = 0; b < B; ++b) {
                           for (std::size_t d = 0; d < D; ++d) {
                             p->grad[b * D + d] += self.grad[(b * T + t) * D + d];
                           }
                         }
                       }
                     });
}

Tensor weighted_step_sum(const Tensor& seq, const Tensor& weights) {
  require_rank("weighted_step_sum", seq, 3);
  require_rank("weighted_step_sum", weights, 2);
  const std::size_t B = seq.dim(0), T = seq.dim(1), D = seq.dim(2);
  if (weights.dim(0) != B || weights.dim(1) != T) {
    shape_mismatch("weighted_step_sum", seq.shape(), weights.shape());
  }
  std::vector<double> out(B * D, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      const double a = weights.values()[b * T + t];
      const double* h = seq.values().data() + (b * T + t) * D;
      for (std::size_t d = 0; d < D; ++d) out[b * D + d] += a * h[d];
    }
  }
  auto sn = seq.node_ptr(), wn = weights.node_ptr();
  return make_result({B, D}, std::move(out), {sn, wn}, "weighted_step_sum",
                     [sn, wn, B, T, D](Node& self) {
                       for (std::size_t b = 0; b < B; ++b) {
                         const double* g = self.grad.data() + b * D;
                         for (std::size_t t = 0; t < T; ++t) {
                           const std::size_t base = (b * T + t) * D;
                           if (sn->requires_grad) {
                             const double a = wn->value[b * T + t];
                             for (std::size_t d = 0; d < D; ++d) sn->grad[base + d] += a * g[d];
                           }
                           if (wn->requires_grad) {
                             double s = 0.0;
                             for (std::size_t d = 0; d < D; ++d) s += sn->value[base + d] * g[d];
                             wn->grad[b * T + t] += s;
                           }
                         }
                       }
                     });
}

Tensor embedding_bag_mean(const Tensor& table, const std::vector<std::vector<std::size_t>>& bags) {
  require_rank("embedding_bag_mean", table, 2);
  const std::size_t R = table.dim(0), D = table.dim(1), N = bags.size();
  if (N == 0) throw ShapeError("embedding_bag_mean: no bags");
  std::vector<double> out(N * D, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    if (bags[n].empty()) continue;
    double* o = out.data() + n * D;
    for (std::size_t r : bags[n]) {
      if (r >= R) {
        throw ShapeError("embedding_bag_mean: row " + std::to_string(r) + " outside table " +
                         shape_str(table.shape()));
      }
      const double* v = table.values().data() + r * D;
      for (std::size_t d = 0; d < D; ++d) o[d] += v[d];
    }
    const double inv = 1.0 / static_cast<double>(bags[n].size());
    for (std::size_t d = 0; d < D; ++d) o[d] *= inv;
  }
  auto tn = table.node_ptr();
  return make_result({N, D}, std::move(out), {tn}, "embedding_bag_mean", [tn, bags, D](Node& self) {
    if (!tn->requires_grad) return;
    for (std::size_t n = 0; n < bags.size(); ++n) {
      if (bags[n].empty()) continue;
      const double inv = 1.0 / static_cast<double>(bags[n].size());
      const double* g = self.grad.data() + n * D;
      for (std::size_t r : bags[n]) {
        double* dst = tn->grad.data() + r * D;
        for (std::size_t d = 0; d < D; ++d) dst[d] += inv * g[d];
        if (tn->sparse_rows) tn->touched_rows.insert(r);
      }
    }
  });
}

namespace {

struct ConvDims {
  std::size_t B, C, F, T, CO, kh, kw;
  std::size_t plane() const { return F * T; }
  std::size_t K() const { return C * kh * kw; }
};

ConvDims conv_dims(const char* op, const Tensor& x, const Tensor& kernel) {
  require_rank(op, x, 4);
  require_rank(op, kernel, 4);
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernel.dim(0), kernel.dim(2), kernel.dim(3)};
  if (kernel.dim(1) != d.C) shape_mismatch(op, x.shape(), kernel.shape());
  if (d.kh % 2 == 0 || d.kw % 2 == 0) {
    throw ShapeError(std::string(op) + ": kernel extents must be odd, got " + shape_str(kernel.shape()));
  }
  return d;
}

using StridedMat = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMat = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// im2col works on bands of frequency rows so the column buffer stays in
// cache instead of spanning the whole map.
constexpr std::size_t kConvTileElems = 1 << 17;

std::size_t band_rows(const ConvDims& d) {
  return std::clamp<std::size_t>(kConvTileElems / std::max<std::size_t>(1, d.K() * d.T), 1, d.F);
}

std::vector<double> conv_forward(const ConvDims& d, const std::vector<double>& x,
                                 const std::vector<double>& kernel) {
  const std::size_t plane = d.plane(), K = d.K(), rows = band_rows(d);
  std::vector<double> out(d.B * d.CO * plane);
  std::vector<double> cols(K * rows * d.T);
  auto w = as_mat(kernel, d.CO, K);
  for (std::size_t b = 0; b < d.B; ++b) {
    for (std::size_t f0 = 0; f0 < d.F; f0 += rows) {
      const std::size_t f1 = std::min(d.F, f0 + rows), n = (f1 - f0) * d.T;
      im2col(x.data() + b * d.C * plane, d.C, d.F, d.T, d.kh, d.kw, f0, f1, cols.data());
      StridedMat dst(out.data() + b * d.CO * plane + f0 * d.T, static_cast<Eigen::Index>(d.CO),
                     static_cast<Eigen::Index>(n), Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
      dst.noalias() = w * as_mat(cols.data(), K, n);
    }
  }
  return out;
}

// Accumulates kernel and input gradients from the output gradient dz.
void conv_backward(const ConvDims& d, Node& x, Node& kernel, const double* dz) {
  const std::size_t plane = d.plane(), K = d.K(), rows = band_rows(d);
  std::vector<double> cols;
  std::vector<double> dcols;
  if (kernel.requires_grad) cols.resize(K * rows * d.T);
  if (x.requires_grad) dcols.resize(K * rows * d.T);
  auto w = as_mat(kernel.value, d.CO, K);
  for (std::size_t b = 0; b < d.B; ++b) {
    for (std::size_t f0 = 0; f0 < d.F; f0 += rows) {
      const std::size_t f1 = std::min(d.F, f0 + rows), n = (f1 - f0) * d.T;
      ConstStridedMat g(dz + b * d.CO * plane + f0 * d.T, static_cast<Eigen::Index>(d.CO),
                        static_cast<Eigen::Index>(n), Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
      if (kernel.requires_grad) {
        im2col(x.value.data() + b * d.C * plane, d.C, d.F, d.T, d.kh, d.kw, f0, f1, cols.data());
        as_mat(kernel.grad, d.CO, K).noalias() += g * as_mat(cols.data(), K, n).transpose();
      }
      if (x.requires_grad) {
        as_mat(dcols.data(), K, n).noalias() = w.transpose() * g;
        col2im_add(dcols.data(), d.C, d.F, d.T, d.kh, d.kw, f0, f1, x.grad.data() + b * d.C * plane);
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel) {
  const ConvDims d = conv_dims("conv2d", x, kernel);
  auto out = conv_forward(d, x.values(), kernel.values());
  auto xn = x.node_ptr(), kn = kernel.node_ptr();
  return make_result({d.B, d.CO, d.F, d.T}, std::move(out), {xn, kn}, "conv2d",
                     [xn, kn, d](Node& self) { conv_backward(d, *xn, *kn, self.grad.data()); });
}

Tensor conv_block(const Tensor& x, const Tensor& kernel, const Tensor& gamma, const Tensor& beta,
                  std::size_t pool_f, std::size_t pool_t, const ConvBlockNorm& norm) {
  const ConvDims d = conv_dims("conv_block", x, kernel);
  if (gamma.numel() != d.CO || beta.numel() != d.CO) {
    shape_mismatch("conv_block", kernel.shape(), gamma.shape());
  }
  if (pool_f == 0 || pool_t == 0 || pool_f > d.F || pool_t > d.T) {
    throw ShapeError("conv_block: pool (" + std::to_string(pool_f) + "," + std::to_string(pool_t) +
                     ") does not fit " + shape_str({d.B, d.CO, d.F, d.T}));
  }
  auto z = std::make_shared<std::vector<double>>(conv_forward(d, x.values(), kernel.values()));
  const std::size_t plane = d.plane();
  const double count = static_cast<double>(d.B * plane);

  std::vector<double> mu(d.CO, 0.0), var(d.CO, 0.0);
  if (norm.training) {
    for (std::size_t b = 0; b < d.B; ++b) {
      for (std::size_t k = 0; k < d.CO; ++k) {
        const double* p = z->data() + (b * d.CO + k) * plane;
        mu[k] += Eigen::Map<const Eigen::ArrayXd>(p, static_cast<Eigen::Index>(plane)).sum();
      }
    }
    for (auto& m : mu) m /= count;
    for (std::size_t b = 0; b < d.B; ++b) {
      for (std::size_t k = 0; k < d.CO; ++k) {
        const double* p = z->data() + (b * d.CO + k) * plane;
        var[k] += (Eigen::Map<const Eigen::ArrayXd>(p, static_cast<Eigen::Index>(plane)) - mu[k])
                      .square()
                      .sum();
      }
    }
    for (auto& v : var) v /= count;
    if (norm.moments) *norm.moments = {mu, var};
  } else {
    if (norm.running_mean.size() != d.CO || norm.running_var.size() != d.CO) {
      throw ShapeError("conv_block: running statistics do not match " + shape_str(kernel.shape()));
    }
    mu.assign(norm.running_mean.begin(), norm.running_mean.end());
    var.assign(norm.running_var.begin(), norm.running_var.end());
  }
  std::vector<double> inv_std(d.CO), a(d.CO), c(d.CO);
  for (std::size_t k = 0; k < d.CO; ++k) {
    inv_std[k] = 1.0 / std::sqrt(var[k] + norm.eps);
    a[k] = gamma.values()[k] * inv_std[k];
    c[k] = beta.values()[k] - a[k] * mu[k];
  }

  // ELU and the affine map are monotone, so each window's maximum sits at the
  // extreme of z in the direction of the scale's sign.
  const std::size_t OF = d.F / pool_f, OT = d.T / pool_t;
  std::vector<double> out(d.B * d.CO * OF * OT);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t b = 0; b < d.B; ++b) {
    for (std::size_t k = 0; k < d.CO; ++k) {
      const std::size_t base = (b * d.CO + k) * plane;
      const double* in = z->data() + base;
      const bool up = a[k] >= 0.0;
      for (std::size_t of = 0; of < OF; ++of) {
        for (std::size_t ot = 0; ot < OT; ++ot) {
          std::size_t best = of * pool_f * d.T + ot * pool_t;
          double extreme = in[best];
          for (std::size_t i = 0; i < pool_f; ++i) {
            const std::size_t row = (of * pool_f + i) * d.T + ot * pool_t;
            if (up) {
              for (std::size_t j = 0; j < pool_t; ++j) {
                const bool take = in[row + j] > extreme;
                extreme = take ? in[row + j] : extreme;
                best = take ? row + j : best;
              }
            } else {
              for (std::size_t j = 0; j < pool_t; ++j) {
                const bool take = in[row + j] < extreme;
                extreme = take ? in[row + j] : extreme;
                best = take ? row + j : best;
              }
            }
          }
          const double y = a[k] * in[best] + c[k];
          const std::size_t o = ((b * d.CO + k) * OF + of) * OT + ot;
          out[o] = y > 0.0 ? y : std::exp(y) - 1.0;
          argmax[o] = base + best;
        }
      }
    }
  }

  auto xn = x.node_ptr(), kn = kernel.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
  const bool training = norm.training;
  return make_result(
      {d.B, d.CO, OF, OT}, std::move(out), {xn, kn, gn, bn}, "conv_block",
      [xn, kn, gn, bn, d, z, training, count, mu = std::move(mu), inv_std = std::move(inv_std),
       a = std::move(a), argmax = std::move(argmax), OF, OT](Node& self) {
        const std::size_t plane = d.plane();
        const std::size_t per_channel = OF * OT;
        // Gradient with respect to the normalized activations is non-zero
        // only at the pooled positions.
        std::vector<double> dy(argmax.size());
        std::vector<double> sum_g(d.CO, 0.0), sum_gx(d.CO, 0.0);
        for (std::size_t o = 0; o < argmax.size(); ++o) {
          const std::size_t k = (o / per_channel) % d.CO;
          const double out = self.value[o];
          dy[o] = self.grad[o] * (out > 0.0 ? 1.0 : out + 1.0);
          sum_g[k] += dy[o];
          sum_gx[k] += dy[o] * ((*z)[argmax[o]] - mu[k]) * inv_std[k];
        }
        if (gn->requires_grad) {
          for (std::size_t k = 0; k < d.CO; ++k) gn->grad[k] += sum_gx[k];
        }
        if (bn->requires_grad) {
          for (std::size_t k = 0; k < d.CO; ++k) bn->grad[k] += sum_g[k];
        }
        if (!xn->requires_grad && !kn->requires_grad) return;
        std::vector<double> dz(z->size(), 0.0);
        if (training) {
          for (std::size_t b = 0; b < d.B; ++b) {
            for (std::size_t k = 0; k < d.CO; ++k) {
              const std::size_t base = (b * d.CO + k) * plane;
              const double s = a[k] / count;
              const double shift = -s * (sum_g[k] - mu[k] * inv_std[k] * sum_gx[k]);
              const double slope = -s * inv_std[k] * sum_gx[k];
              for (std::size_t i = 0; i < plane; ++i) dz[base + i] = shift + slope * (*z)[base + i];
            }
          }
        }
        for (std::size_t o = 0; o < argmax.size(); ++o) {
          const std::size_t k = (o / per_channel) % d.CO;
          dz[argmax[o]] += a[k] * dy[o];
        }
        conv_backward(d, *xn, *kn, dz.data());
      });
}

Tensor maxpool2d(const Tensor& x, std::size_t pool_f, std::size_t pool_t) {
  require_rank("maxpool2d", x, 4);
  const std::size_t B = x.dim(0), C = x.dim(1), F = x.dim(2), T = x.dim(3);
  if (pool_f == 0 || pool_t == 0 || pool_f > F || pool_t > T) {
    throw ShapeError("maxpool2d: pool (" + std::to_string(pool_f) + "," + std::to_string(pool_t) +
                     ") does not fit " + shape_str(x.shape()));
  }
  const std::size_t OF = F / pool_f, OT = T / pool_t;
  std::vector<double> out(B * C * OF * OT);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* in = x.values().data() + bc * F * T;
    for (std::size_t of = 0; of < OF; ++of) {
      for (std::size_t ot = 0; ot < OT; ++ot) {
        std::size_t best = (of * pool_f) * T + ot * pool_t;
        for (std::size_t i = 0; i < pool_f; ++i) {
          for (std::size_t j = 0; j < pool_t; ++j) {
            std::size_t idx = (of * pool_f + i) * T + ot * pool_t + j;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (bc * OF + of) * OT + ot;
        out[o] = in[best];
        argmax[o] = bc * F * T + best;
      }
    }
  }
  auto xn = x.node_ptr();
  return make_result({B, C, OF, OT}, std::move(out), {xn}, "maxpool2d",
                     [xn, argmax = std::move(argmax)](Node& self) {
                       if (!xn->requires_grad) return;
                       for (std::size_t o = 0; o < argmax.size(); ++o) xn->grad[argmax[o]] += self.grad[o];
                     });
}

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::size_t axis,
                        double eps, BatchMoments* moments) {
  const AxisView v = axis_view(x.shape(), axis);
  if (gamma.numel() != v.n || beta.numel() != v.n) shape_mismatch("batch_norm", x.shape(), gamma.shape());
  const double count = static_cast<double>(v.outer * v.inner);
  std::vector<double> mu(v.n, 0.0), var(v.n, 0.0);
  const auto& xv = x.values();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.n; ++k) {
      const double* p = xv.data() + (o * v.n + k) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) mu[k] += p[i];
    }
  }
  for (auto& m : mu) m /= count;
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.n; ++k) {
      const double* p = xv.data() + (o * v.n + k) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) var[k] += (p[i] - mu[k]) * (p[i] - mu[k]);
    }
  }
  for (auto& s : var) s /= count;
  std::vector<double> inv_std(v.n), out(xv.size());
  for (std::size_t k = 0; k < v.n; ++k) inv_std[k] = 1.0 / std::sqrt(var[k] + eps);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.n; ++k) {
      const std::size_t base = (o * v.n + k) * v.inner;
      const double g = gamma.values()[k] * inv_std[k], b = beta.values()[k] - g * mu[k];
      for (std::size_t i = 0; i < v.inner; ++i) out[base + i] = g * xv[base + i] + b;
    }
  }
  if (moments) *moments = {mu, var};
  auto xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
  // xhat is recomputed from the retained input instead of being stored.
  return make_result(x.shape(), std::move(out), {xn, gn, bn}, "batch_norm",
                     [xn, gn, bn, v, count, inv_std = std::move(inv_std),
                      mu = std::move(mu)](Node& self) {
                       const auto& xv = xn->value;
                       auto xhat = [&](std::size_t k, std::size_t idx) { return (xv[idx] - mu[k]) * inv_std[k]; };
                       std::vector<double> sum_g(v.n, 0.0), sum_gx(v.n, 0.0);
                       for (std::size_t o = 0; o < v.outer; ++o) {
                         for (std::size_t k = 0; k < v.n; ++k) {
                           const std::size_t base = (o * v.n + k) * v.inner;
                           double sg = 0.0, sgx = 0.0;
                           for (std::size_t i = 0; i < v.inner; ++i) {
                             sg += self.grad[base + i];
                             sgx += self.grad[base + i] * xhat(k, base + i);
                           }
                           sum_g[k] += sg;
                           sum_gx[k] += sgx;
                         }
                       }
                       if (gn->requires_grad) {
                         for (std::size_t k = 0; k < v.n; ++k) gn->grad[k] += sum_gx[k];
                       }
                       if (bn->requires_grad) {
                         for (std::size_t k = 0; k < v.n; ++k) bn->grad[k] += sum_g[k];
                       }
                       if (!xn->requires_grad) return;
                       for (std::size_t o = 0; o < v.outer; ++o) {
                         for (std::size_t k = 0; k < v.n; ++k) {
                           const std::size_t base = (o * v.n + k) * v.inner;
                           const double scale = gn->value[k] * inv_std[k] / count;
                           for (std::size_t i = 0; i < v.inner; ++i) {
                             xn->grad[base + i] += scale * (count * self.grad[base + i] - sum_g[k] -
                                                            xhat(k, base + i) * sum_gx[k]);
                           }
                         }
                       }
                     });
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::size_t axis,
                       std::span<const double> mean, std::span<const double> var, double eps) {
  const AxisView v = axis_view(x.shape(), axis);
  if (gamma.numel() != v.n || beta.numel() != v.n || mean.size() != v.n || var.size() != v.n) {
    shape_mismatch("batch_norm", x.shape(), gamma.shape());
  }
  std::vector<double> inv_std(v.n), out(x.numel());
  for (std::size_t k = 0; k < v.n; ++k) inv_std[k] = 1.0 / std::sqrt(var[k] + eps);
  std::vector<double> mu(mean.begin(), mean.end());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.n; ++k) {
      const std::size_t base = (o * v.n + k) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) {
        out[base + i] = gamma.values()[k] * (x.values()[base + i] - mu[k]) * inv_std[k] + beta.values()[k];
      }
    }
  }
  auto xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
  return make_result(x.shape(), std::move(out), {xn, gn, bn}, "batch_norm_eval",
                     [xn, gn, bn, v, inv_std, mu](Node& self) {
                       for (std::size_t o = 0; o < v.outer; ++o) {
                         for (std::size_t k = 0; k < v.n; ++k) {
                           const std::size_t base = (o * v.n + k) * v.inner;
                           for (std::size_t i = 0; i < v.inner; ++i) {
                             const double g = self.grad[base + i];
                             const double xhat = (xn->value[base + i] - mu[k]) * inv_std[k];
                             if (xn->requires_grad) xn->grad[base + i] += g * gn->value[k] * inv_std[k];
                             if (gn->requires_grad) gn->grad[k] += g * xhat;
                             if (bn->requires_grad) bn->grad[k] += g;
                           }
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ShapeError("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * mask[i];
  auto xn = x.node_ptr();
  return make_result(x.shape(), std::move(out), {xn}, "dropout", [xn, mask = std::move(mask)](Node& self) {
    if (!xn->requires_grad) return;
    for (std::size_t i = 0; i < mask.size(); ++i) xn->grad[i] += self.grad[i] * mask[i];
  });
}

namespace {

Tensor cross_entropy_impl(const Tensor& logits, const std::vector<double>& targets,
                          std::span<const double> weights) {
  require_rank("cross_entropy", logits, 2);
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  if (!weights.empty() && weights.size() != N) {
    throw ShapeError("cross_entropy: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(N) + " rows");
  }
  for (double v : logits.values()) {
    if (!std::isfinite(v)) throw NumericError("cross_entropy: non-finite logit");
  }
  std::vector<double> probs(N * C);
  std::vector<double> w(N, 1.0);
  if (!weights.empty()) std::copy(weights.begin(), weights.end(), w.begin());
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const double* x = logits.values().data() + n * C;
    const double m = *std::max_element(x, x + C);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(x[c] - m);
    const double lse = m + std::log(z);
    double loss = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      probs[n * C + c] = std::exp(x[c] - lse);
      const double y = targets[n * C + c];
      if (y != 0.0) loss -= y * (x[c] - lse);
    }
    total += w[n] * loss;
  }
  total /= static_cast<double>(N);
  auto ln = logits.node_ptr();
  return make_result({1}, {total}, {ln}, "cross_entropy",
                     [ln, probs = std::move(probs), targets, w, N, C](Node& self) {
                       if (!ln->requires_grad) return;
                       const double g = self.grad[0] / static_cast<double>(N);
                       for (std::size_t n = 0; n < N; ++n) {
                         double ysum = 0.0;
                         for (std::size_t c = 0; c < C; ++c) ysum += targets[n * C + c];
                         for (std::size_t c = 0; c < C; ++c) {
                           ln->grad[n * C + c] +=
                               g * w[n] * (ysum * probs[n * C + c] - targets[n * C + c]);
                         }
                       }
                     });
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const double> weights) {
  require_rank("cross_entropy", logits, 2);
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  if (labels.size() != N) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(N) + " rows");
  }
  std::vector<double> targets(N * C, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= C) {
      throw ShapeError("cross_entropy: label " + std::to_string(labels[n]) + " outside " +
                       std::to_string(C) + " classes");
    }
    targets[n * C + static_cast<std::size_t>(labels[n])] = 1.0;
  }
  return cross_entropy_impl(logits, targets, weights);
}

Tensor cross_entropy(const Tensor& logits, const Tensor& targets, std::span<const double> weights) {
  require_same("cross_entropy", logits, targets);
  return cross_entropy_impl(logits, targets.values(), weights);
}

}  // namespace lyricmood::nn
