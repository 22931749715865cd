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

#include <Eigen/Core>
#include <vector>

#include "ssld/error.hpp"
#include "ssld/ops.hpp"

namespace ssld {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct ConvGeometry {
  std::size_t B, C, H, W, F, kh, kw, stride, pad, Ho, Wo;
  std::size_t K() const { return C * kh * kw; }
  std::size_t P() const { return Ho * Wo; }
};

// cols[K x B*P]: row (c,ki,kj), column (b,oy,ox). Out-of-bounds taps are 0.
void im2col(const ConvGeometry& g, const float* in, float* cols) {
  const std::size_t N = g.B * g.P();
  for (std::size_t c = 0; c < g.C; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        float* row = cols + ((c * g.kh + ki) * g.kw + kj) * N;
        for (std::size_t b = 0; b < g.B; ++b) {
          const float* plane = in + (b * g.C + c) * g.H * g.W;
          float* dst = row + b * g.P();
          for (std::size_t oy = 0; oy < g.Ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) -
                            static_cast<long>(g.pad);
            for (std::size_t ox = 0; ox < g.Wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) -
                              static_cast<long>(g.pad);
              dst[oy * g.Wo + ox] =
                  (iy >= 0 && iy < static_cast<long>(g.H) && ix >= 0 &&
                   ix < static_cast<long>(g.W))
                      ? plane[iy * static_cast<long>(g.W) + ix]
                      : 0.0f;
            }
          }
        }
      }
}

void col2im_add(const ConvGeometry& g, const float* cols, float* in_grad) {
  const std::size_t N = g.B * g.P();
  for (std::size_t c = 0; c < g.C; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const float* row = cols + ((c * g.kh + ki) * g.kw + kj) * N;
        for (std::size_t b = 0; b < g.B; ++b) {
          float* plane = in_grad + (b * g.C + c) * g.H * g.W;
          const float* src = row + b * g.P();
          for (std::size_t oy = 0; oy < g.Ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ki) -
                            static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.H)) continue;
            for (std::size_t ox = 0; ox < g.Wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kj) -
                              static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.W)) continue;
              plane[iy * static_cast<long>(g.W) + ix] += src[oy * g.Wo + ox];
            }
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding) {
  if (input.ndim() != 4 || kernel.ndim() != 4 ||
      input.dim(1) != kernel.dim(1)) {
    throw ShapeError("conv2d: incompatible input " + shape_str(input.shape()) +
                     " and kernel " + shape_str(kernel.shape()));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.B = input.dim(0);
  g.C = input.dim(1);
  g.H = input.dim(2);
  g.W = input.dim(3);
  g.F = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (g.kh > g.H + 2 * padding || g.kw > g.W + 2 * padding) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) +
                     " larger than padded input " + shape_str(input.shape()) +
                     " (padding " + std::to_string(padding) + ")");
  }
  g.Ho = (g.H + 2 * padding - g.kh) / stride + 1;
  g.Wo = (g.W + 2 * padding - g.kw) / stride + 1;

  const std::size_t K = g.K(), N = g.B * g.P();
  std::vector<float> cols(K * N);
  im2col(g, input.data().data(), cols.data());

  RowMat prod(g.F, N);
  prod.noalias() = ConstMatMap(kernel.data().data(), g.F, K) *
                   ConstMatMap(cols.data(), K, N);

  std::vector<float> out(g.B * g.F * g.P());
  for (std::size_t b = 0; b < g.B; ++b)
    for (std::size_t f = 0; f < g.F; ++f)
      std::copy_n(prod.data() + f * N + b * g.P(), g.P(),
                  out.data() + (b * g.F + f) * g.P());

  return make_result(
      {g.B, g.F, g.Ho, g.Wo}, std::move(out), {input, kernel},
      [input, kernel, g, cols = std::move(cols)](const detail::TensorImpl& o) {
        const std::size_t K = g.K(), N = g.B * g.P();
        RowMat grad_mat(g.F, N);
        for (std::size_t b = 0; b < g.B; ++b)
          for (std::size_t f = 0; f < g.F; ++f)
            std::copy_n(o.grad.data() + (b * g.F + f) * g.P(), g.P(),
                        grad_mat.data() + f * N + b * g.P());
        if (kernel.requires_grad()) {
          MatMap gk(kernel.impl().grad_buffer().data(), g.F, K);
          gk.noalias() += grad_mat * ConstMatMap(cols.data(), K, N).transpose();
        }
        if (input.requires_grad()) {
          RowMat gcols(K, N);
          gcols.noalias() =
              ConstMatMap(kernel.data().data(), g.F, K).transpose() * grad_mat;
          col2im_add(g, gcols.data(), input.impl().grad_buffer().data());
        }
      });
}

}  // namespace ssld
