/*
 * Copyright 2026 The ssl-distill Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ssld/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ssld/error.hpp"

namespace ssld {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

using Impl = detail::TensorImpl;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_ndim(const char* op, const Tensor& x, std::size_t n) {
  if (x.ndim() != n) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(n) +
                     "-D input, got " + shape_str(x.shape()));
  }
}

// Elementwise op whose derivative is expressed through input and output.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x},
                     [x, deriv](const Impl& o) {
                       auto& g = x.impl().grad_buffer();
                       auto in = x.data();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += o.grad[i] * deriv(in[i], o.data[i]);
                       }
                     });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<float> out(m * n);
  ConstMatMap A(a.data().data(), m, k);
  ConstMatMap B(b.data().data(), k, n);
  MatMap(out.data(), m, n).noalias() = A * B;
  return make_result({m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](const Impl& o) {
                       ConstMatMap G(o.grad.data(), m, n);
                       if (a.requires_grad()) {
                         MatMap GA(a.impl().grad_buffer().data(), m, k);
                         GA.noalias() +=
                             G * ConstMatMap(b.data().data(), k, n).transpose();
                       }
                       if (b.requires_grad()) {
                         MatMap GB(b.impl().grad_buffer().data(), k, n);
                         GB.noalias() +=
                             ConstMatMap(a.data().data(), m, k).transpose() * G;
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_ndim("transpose", a, 2);
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<float> out(m * n);
  MatMap(out.data(), n, m) = ConstMatMap(a.data().data(), m, n).transpose();
  return make_result({n, m}, std::move(out), {a}, [a, m, n](const Impl& o) {
    MatMap GA(a.impl().grad_buffer().data(), m, n);
    GA += ConstMatMap(o.grad.data(), n, m).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    auto x = a.data(), y = b.data();
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return make_result(a.shape(), std::move(out), {a, b},
                       [a, b](const Impl& o) {
                         for (const Tensor* t : {&a, &b}) {
                           if (!t->requires_grad()) continue;
                           auto& g = t->impl().grad_buffer();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             g[i] += o.grad[i];
                         }
                       });
  }
  if (b.ndim() == 1 && a.ndim() >= 1 && a.shape().back() == b.dim(0)) {
    const auto n = b.dim(0);
    const auto rows = a.numel() / n;
    auto x = a.data(), y = b.data();
    std::vector<float> out(x.size());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x[r * n + j] + y[j];
    return make_result(a.shape(), std::move(out), {a, b},
                       [a, b, rows, n](const Impl& o) {
                         if (a.requires_grad()) {
                           auto& g = a.impl().grad_buffer();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             g[i] += o.grad[i];
                         }
                         if (b.requires_grad()) {
                           auto& g = b.impl().grad_buffer();
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t j = 0; j < n; ++j)
                               g[j] += o.grad[r * n + j];
                         }
                       });
  }
  throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Impl& o) {
    if (a.requires_grad()) {
      auto& g = a.impl().grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (b.requires_grad()) {
      auto& g = b.impl().grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Impl& o) {
    if (a.requires_grad()) {
      auto& g = a.impl().grad_buffer();
      auto y = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * y[i];
    }
    if (b.requires_grad()) {
      auto& g = b.impl().grad_buffer();
      auto x = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, float factor) { return affine(a, factor, 0.0f); }

Tensor affine(const Tensor& a, float factor, float offset) {
  return unary(
      a, [=](float v) { return factor * v + offset; },
      [=](float, float) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](float v) {
        // Split by sign so exp never overflows.
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        float e = std::exp(v);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](float v) { return std::log(v); },
      [](float v, float) { return 1.0f / v; });
}

Tensor clamp(const Tensor& x, float lo, float hi) {
  return unary(
      x, [=](float v) { return std::clamp(v, lo, hi); },
      [=](float v, float) { return (v >= lo && v <= hi) ? 1.0f : 0.0f; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return make_result({}, {static_cast<float>(acc)}, {x}, [x](const Impl& o) {
    auto& g = x.impl().grad_buffer();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  const double n = static_cast<double>(x.numel());
  return make_result({}, {static_cast<float>(acc / n)}, {x},
                     [x, n](const Impl& o) {
                       auto& g = x.impl().grad_buffer();
                       const float d = static_cast<float>(o.grad[0] / n);
                       for (auto& v : g) v += d;
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x},
                     [x](const Impl& o) {
                       auto& g = x.impl().grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += o.grad[i];
                     });
}

Tensor flatten(const Tensor& x) {
  if (x.ndim() < 1) throw ShapeError("flatten: scalar input");
  const auto b = x.dim(0);
  return reshape(x, {b, b == 0 ? 0 : x.numel() / b});
}

Tensor maxpool2d(const Tensor& x, std::size_t window) {
  require_ndim("maxpool2d", x, 4);
  if (window == 0 || window > x.dim(2) || window > x.dim(3)) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) +
                     " does not fit input " + shape_str(x.shape()));
  }
  const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto Ho = H / window, Wo = W / window;
  auto in = x.data();
  std::vector<float> out(B * C * Ho * Wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const float* plane = in.data() + bc * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        std::size_t best = (oy * window) * W + ox * window;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) {
            std::size_t idx = (oy * window + ky) * W + ox * window + kx;
            if (plane[idx] > plane[best]) best = idx;
          }
        const auto o = (bc * Ho + oy) * Wo + ox;
        out[o] = plane[best];
        argmax[o] = bc * H * W + best;
      }
    }
  }
  return make_result({B, C, Ho, Wo}, std::move(out), {x},
                     [x, argmax = std::move(argmax)](const Impl& o) {
                       auto& g = x.impl().grad_buffer();
                       for (std::size_t i = 0; i < argmax.size(); ++i)
                         g[argmax[i]] += o.grad[i];
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  require_ndim("global_avg_pool", x, 4);
  const auto B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto in = x.data();
  std::vector<float> out(B * C);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double acc = 0.0;
    for (std::size_t p = 0; p < HW; ++p) acc += in[bc * HW + p];
    out[bc] = static_cast<float>(acc / static_cast<double>(HW));
  }
  return make_result({B, C}, std::move(out), {x}, [x, HW](const Impl& o) {
    auto& g = x.impl().grad_buffer();
    const float inv = 1.0f / static_cast<float>(HW);
    for (std::size_t bc = 0; bc < o.grad.size(); ++bc) {
      const float d = o.grad[bc] * inv;
      for (std::size_t p = 0; p < HW; ++p) g[bc * HW + p] += d;
    }
  });
}

NormState NormState::make(std::size_t channels, float momentum, float eps) {
  NormState s;
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::full({channels}, 1.0f);
  s.momentum = momentum;
  s.eps = eps;
  return s;
}

Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    NormState& state, bool training) {
  if (x.ndim() != 2 && x.ndim() != 4) {
    throw ShapeError("channel_norm: expected [B,C] or [B,C,H,W], got " +
                     shape_str(x.shape()));
  }
  const auto B = x.dim(0), C = x.dim(1);
  const auto S = x.ndim() == 4 ? x.dim(2) * x.dim(3) : std::size_t{1};
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C} ||
      state.running_mean.shape() != Shape{C} ||
      state.running_var.shape() != Shape{C}) {
    throw ShapeError("channel_norm: parameters must have shape [" +
                     std::to_string(C) + "]");
  }
  const auto M = B * S;
  if (M == 0) throw ShapeError("channel_norm: empty batch");
  auto in = x.data();
  auto g = gamma.data(), bt = beta.data();
  std::vector<float> out(in.size());
  std::vector<float> xhat(in.size());
  std::vector<float> inv_std(C);
  const float eps = state.eps;

  for (std::size_t c = 0; c < C; ++c) {
    float mu, var;
    if (training) {
      double acc = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < S; ++s) acc += in[(b * C + c) * S + s];
      const double m = acc / static_cast<double>(M);
      double sq = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < S; ++s) {
          const double d = in[(b * C + c) * S + s] - m;
          sq += d * d;
        }
      mu = static_cast<float>(m);
      var = static_cast<float>(sq / static_cast<double>(M));
      const float unbiased =
          M > 1 ? static_cast<float>(sq / static_cast<double>(M - 1)) : var;
      auto rm = state.running_mean.data();
      auto rv = state.running_var.data();
      rm[c] = state.momentum * rm[c] + (1.0f - state.momentum) * mu;
      rv[c] = state.momentum * rv[c] + (1.0f - state.momentum) * unbiased;
    } else {
      mu = state.running_mean.data()[c];
      var = state.running_var.data()[c];
    }
    inv_std[c] = 1.0f / std::sqrt(var + eps);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t s = 0; s < S; ++s) {
        const auto i = (b * C + c) * S + s;
        xhat[i] = (in[i] - mu) * inv_std[c];
        out[i] = g[c] * xhat[i] + bt[c];
      }
  }

  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, training, B, C, S, M, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](const Impl& o) {
        const auto& go = o.grad;
        for (std::size_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t s = 0; s < S; ++s) {
              const auto i = (b * C + c) * S + s;
              sum_g += go[i];
              sum_gx += static_cast<double>(go[i]) * xhat[i];
            }
          if (gamma.requires_grad())
            gamma.impl().grad_buffer()[c] += static_cast<float>(sum_gx);
          if (beta.requires_grad())
            beta.impl().grad_buffer()[c] += static_cast<float>(sum_g);
          if (!x.requires_grad()) continue;
          auto& gx = x.impl().grad_buffer();
          const float gc = gamma.data()[c];
          if (training) {
            const double mg = sum_g / static_cast<double>(M);
            const double mgx = sum_gx / static_cast<double>(M);
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t s = 0; s < S; ++s) {
                const auto i = (b * C + c) * S + s;
                gx[i] += static_cast<float>(gc * inv_std[c] *
                                            (go[i] - mg - xhat[i] * mgx));
              }
          } else {
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t s = 0; s < S; ++s) {
                const auto i = (b * C + c) * S + s;
                gx[i] += gc * inv_std[c] * go[i];
              }
          }
        }
      });
}

Tensor normalize_rows(const Tensor& x) {
  require_ndim("normalize_rows", x, 2);
  const auto n = x.dim(0), d = x.dim(1);
  auto in = x.data();
  std::vector<float> out(in.size());
  std::vector<float> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      sq += static_cast<double>(in[i * d + j]) * in[i * d + j];
    if (sq == 0.0) {
      throw ValidationError("normalize_rows: row " + std::to_string(i) +
                            " is a zero vector");
    }
    norms[i] = static_cast<float>(std::sqrt(sq));
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = in[i * d + j] / norms[i];
  }
  return make_result(x.shape(), std::move(out), {x},
                     [x, n, d, norms = std::move(norms)](const Impl& o) {
                       auto& g = x.impl().grad_buffer();
                       for (std::size_t i = 0; i < n; ++i) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < d; ++j)
                           dot += static_cast<double>(o.grad[i * d + j]) *
                                  o.data[i * d + j];
                         for (std::size_t j = 0; j < d; ++j) {
                           const auto k = i * d + j;
                           g[k] += static_cast<float>(
                               (o.grad[k] - o.data[k] * dot) / norms[i]);
                         }
                       }
                     });
}

Tensor row_logsumexp(const Tensor& x, bool exclude_diagonal) {
  require_ndim("row_logsumexp", x, 2);
  const auto n = x.dim(0), m = x.dim(1);
  if (m == 0 || (exclude_diagonal && m < 2)) {
    throw ShapeError("row_logsumexp: no terms to sum in " +
                     shape_str(x.shape()));
  }
  auto in = x.data();
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    float mx = -std::numeric_limits<float>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      if (exclude_diagonal && k == i) continue;
      mx = std::max(mx, in[i * m + k]);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (exclude_diagonal && k == i) continue;
      acc += std::exp(static_cast<double>(in[i * m + k]) - mx);
    }
    out[i] = static_cast<float>(mx + std::log(acc));
  }
  return make_result({n}, std::move(out), {x},
                     [x, n, m, exclude_diagonal](const Impl& o) {
                       auto& g = x.impl().grad_buffer();
                       auto in = x.data();
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t k = 0; k < m; ++k) {
                           if (exclude_diagonal && k == i) continue;
                           const double p = std::exp(
                               static_cast<double>(in[i * m + k]) - o.data[i]);
                           g[i * m + k] += static_cast<float>(o.grad[i] * p);
                         }
                       }
                     });
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols) {
  require_ndim("gather_cols", x, 2);
  const auto n = x.dim(0), m = x.dim(1);
  if (cols.size() != n) {
    throw ShapeError("gather_cols: " + std::to_string(cols.size()) +
                     " indices for " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (idx[i] >= m) throw ShapeError("gather_cols: column index out of range");
    out[i] = x.data()[i * m + idx[i]];
  }
  return make_result({n}, std::move(out), {x},
                     [x, m, idx = std::move(idx)](const Impl& o) {
                       auto& g = x.impl().grad_buffer();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         g[i * m + idx[i]] += o.grad[i];
                     });
}

}  // namespace ssld
