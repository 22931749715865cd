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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ssld/losses.hpp"
#include "ssld/ops.hpp"
#include "ssld/optim.hpp"
#include "ssld/rng.hpp"
#include "ssld/tensor.hpp"

namespace ssld {

/// Ordered (name, tensor) pairs: trainable parameters followed by
/// normalization running statistics. The unit of checkpointing.
using StateDict = std::vector<std::pair<std::string, Tensor>>;

struct StageSpec {
  std::size_t channels = 0;
  std::size_t blocks = 0;
};

/// Residual encoder description. Every stage halves the spatial resolution
/// in its first block.
struct EncoderSpec {
  std::string name;
  std::vector<StageSpec> stages;
  std::size_t input_size = 32;
  std::size_t feature_dim = 128;
  std::size_t in_channels = 3;

  void validate() const;
};

// "16x1,32x1,48x1" -> {{16,1},{32,1},{48,1}}
std::vector<StageSpec> parse_stages(const std::string& text);
std::string format_stages(const std::vector<StageSpec>& stages);

EncoderSpec teacher_spec();  // "tiny-t"
EncoderSpec student_spec();  // "tiny-s"

/// Looks up a built-in spec or one of `custom` by name.
EncoderSpec resolve_spec(const std::string& name,
                         const std::map<std::string, EncoderSpec>& custom = {});

struct NormOptions {
  float momentum = 0.9f;
  float eps = 1e-5f;
};

namespace layers {

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
         Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, StateDict& out) const;
  std::size_t stride() const { return stride_; }

 private:
  Tensor weight_;
  std::size_t stride_ = 1;
  std::size_t padding_ = 0;
};

class Norm {
 public:
  Norm() = default;
  Norm(std::size_t channels, const NormOptions& opts);
  Tensor forward(const Tensor& x, bool training);
  void collect(const std::string& prefix, StateDict& params,
               StateDict& buffers) const;

 private:
  Tensor scale_, shift_;
  NormState state_;
};

class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, StateDict& out) const;
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [out]
};

}  // namespace layers

/// Convolutional feature extractor: stem conv, residual stages, global
/// average pooling and a dense layer to `feature_dim`.
class Encoder {
 public:
  Encoder(EncoderSpec spec, Rng rng, NormOptions norm = {});

  // [B, C, S, S] -> [B, feature_dim]
  Tensor forward(const Tensor& images, bool training);

  const EncoderSpec& spec() const { return spec_; }
  ParameterSet parameters() const;
  StateDict state() const;
  std::size_t parameter_count() const { return parameters().count_values(); }

 private:
  struct Block {
    layers::Conv2d conv1, conv2;
    layers::Norm norm1, norm2;
    bool has_projection = false;
    layers::Conv2d proj;
    layers::Norm proj_norm;
  };

  void collect(StateDict& params, StateDict& buffers) const;

  EncoderSpec spec_;
  layers::Conv2d stem_;
  layers::Norm stem_norm_;
  std::vector<std::vector<Block>> stages_;
  layers::Dense fc_;
};

/// dense -> norm -> relu -> dense; maps features to the contrastive space.
/// Only used during pretraining.
class ProjectionHead {
 public:
  ProjectionHead(std::size_t feature_dim, std::size_t hidden_dim,
                 std::size_t output_dim, Rng rng, NormOptions norm = {});
  Tensor forward(const Tensor& features, bool training);
  ParameterSet parameters() const;
  StateDict state() const;
  std::size_t output_dim() const { return output_dim_; }

 private:
  layers::Dense fc1_, fc2_;
  layers::Norm norm_;
  std::size_t output_dim_;
};

/// Dense feature_dim -> 1 followed by a sigmoid.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t feature_dim, Rng rng);
  // [B, feature_dim] -> [B] probabilities
  Tensor forward(const Tensor& features) const;
  ParameterSet parameters() const;
  StateDict state() const;
  layers::Dense& dense() { return fc_; }

 private:
  layers::Dense fc_;
};

/// Encodes a batch of 2N views ordered [x1, x1', x2, x2', ...].
EmbeddingBatch forward_pretrain(Encoder& encoder, ProjectionHead& head,
                                const Tensor& views, bool training = true);

/// Per-image probability of the positive class.
Tensor forward_classify(Encoder& encoder, const ClassifierHead& head,
                        const Tensor& images, bool training);

/// Copies tensors from `source` into the same-named entries of `target`.
/// Every target entry must be present with an identical shape.
void load_state(const StateDict& target, const StateDict& source,
                const std::string& prefix = "");

}  // namespace ssld
