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

/// 2N projected views, row 2k and row 2k+1 being the two views of image k.
struct EmbeddingBatch {
  Tensor z;  // [2N, d]

  std::size_t views() const { return z.dim(0); }
  std::size_t pairs() const { return z.dim(0) / 2; }
  static std::size_t partner(std::size_t view) { return view ^ 1u; }
};

struct NtXentConfig {
  double temperature = 0.5;
};

// u.v / (|u| |v|), evaluated in double. Throws on a zero vector.
double cosine_similarity(std::span<const float> u, std::span<const float> v);

/// Contrastive loss over 2N views:
///   L(i,j) = -log( exp(s_ij / t) / sum_{k != i} exp(s_ik / t) ),
/// s = cosine similarity, j = partner(i), averaged over all 2N ordered
/// positive pairs. Differentiable w.r.t. batch.z.
Tensor nt_xent(const EmbeddingBatch& batch, const NtXentConfig& cfg);

inline constexpr double kDefaultBceEps = 1e-7;

/// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps].
/// Targets may be hard {0,1} or soft [0,1].
Tensor bce(const Tensor& probabilities, const Tensor& targets,
           double eps = kDefaultBceEps);

}  // namespace ssld
