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

#pragma once

#include <cstddef>
#include <span>

#include "ssld/tensor.hpp"

namespace ssld {

// Dense algebra. All differentiable w.r.t. every tensor argument.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// Same shapes, or b 1-D with length equal to a's last dimension (bias).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
// factor * a + offset
Tensor affine(const Tensor& a, float factor, float offset);

// Elementwise.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
// Gradient is zero where the input was clipped.
Tensor clamp(const Tensor& x, float lo, float hi);

// Reductions to a scalar; accumulate in double.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Structural.
Tensor reshape(const Tensor& x, Shape shape);
// [B, ...] -> [B, prod(...)]
Tensor flatten(const Tensor& x);
// Non-overlapping window x window max pooling on [B,C,H,W].
Tensor maxpool2d(const Tensor& x, std::size_t window);
// [B,C,H,W] -> [B,C]
Tensor global_avg_pool(const Tensor& x);

/// Running statistics of a channel_norm layer.
struct NormState {
  Tensor running_mean;
  Tensor running_var;
  float momentum = 0.9f;  // weight kept on the old running value
  float eps = 1e-5f;

  static NormState make(std::size_t channels, float momentum = 0.9f,
                        float eps = 1e-5f);
};

/// Per-channel normalization over the batch (and spatial dims for 4-D input)
/// with learnable scale and shift. Training mode normalizes with batch
/// statistics and folds them into the running estimates (unbiased variance);
/// evaluation mode uses the running estimates.
Tensor channel_norm(const Tensor& x, const Tensor& scale, const Tensor& shift,
                    NormState& state, bool training);

/// input [B,C,H,W], kernel [F,C,kh,kw] -> [B,F,H',W'],
/// H' = (H + 2*padding - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding);

// Row-wise L2 normalization of a 2-D tensor; throws on an all-zero row.
Tensor normalize_rows(const Tensor& x);
// out[i] = log sum_k exp(x[i,k]), optionally skipping k == i.
Tensor row_logsumexp(const Tensor& x, bool exclude_diagonal);
// out[i] = x[i, cols[i]]
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols);

}  // namespace ssld
