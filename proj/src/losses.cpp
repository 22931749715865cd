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

#include "ssld/losses.hpp"

#include <cmath>
#include <vector>

#include "ssld/error.hpp"
#include "ssld/ops.hpp"

namespace ssld {

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_similarity: length mismatch " +
                     std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw ValidationError("cosine_similarity: zero vector");
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

Tensor nt_xent(const EmbeddingBatch& batch, const NtXentConfig& cfg) {
  if (!(cfg.temperature > 0.0)) {
    throw ValidationError("nt_xent: temperature must be positive, got " +
                          std::to_string(cfg.temperature));
  }
  const Tensor& z = batch.z;
  if (!z.defined() || z.ndim() != 2) {
    throw ShapeError("nt_xent: embeddings must be a [2N, d] matrix");
  }
  if (z.dim(0) < 4 || z.dim(0) % 2 != 0) {
    throw ValidationError("nt_xent: batch too small, need an even number of "
                          ">= 4 views, got " + std::to_string(z.dim(0)));
  }
  const std::size_t n = z.dim(0);
  Tensor unit = normalize_rows(z);
  Tensor logits = scale(matmul(unit, transpose(unit)),
                        static_cast<float>(1.0 / cfg.temperature));
  std::vector<std::size_t> positives(n);
  for (std::size_t i = 0; i < n; ++i) positives[i] = EmbeddingBatch::partner(i);
  return mean(sub(row_logsumexp(logits, /*exclude_diagonal=*/true),
                  gather_cols(logits, positives)));
}

Tensor bce(const Tensor& probabilities, const Tensor& targets, double eps) {
  if (probabilities.numel() != targets.numel()) {
    throw ShapeError("bce: length mismatch " +
                     shape_str(probabilities.shape()) + " vs " +
                     shape_str(targets.shape()));
  }
  if (probabilities.numel() == 0) throw ShapeError("bce: empty input");
  const float e = static_cast<float>(eps);
  Tensor p = clamp(reshape(probabilities, {probabilities.numel()}), e, 1.0f - e);
  Tensor y = reshape(targets, {targets.numel()});
  Tensor pos = mul(y, log(p));
  Tensor neg = mul(affine(y, -1.0f, 1.0f), log(affine(p, -1.0f, 1.0f)));
  return scale(mean(add(pos, neg)), -1.0f);
}

}  // namespace ssld
