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

#include "ssld/models.hpp"

#include <cmath>
#include <sstream>
#include <unordered_map>

#include "ssld/error.hpp"

namespace ssld {

namespace {

// He-style fan-in scaled uniform: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor::from(std::move(shape), std::move(v), true);
}

ParameterSet to_parameter_set(const StateDict& params) {
  ParameterSet ps;
  for (const auto& [name, t] : params) ps.add(name, t);
  return ps;
}

}  // namespace

void EncoderSpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw ValidationError("invalid encoder spec '" + name + "': " + why);
  };
  if (name.empty()) fail("empty name");
  if (stages.empty()) fail("no stages");
  for (const auto& s : stages)
    if (s.channels == 0 || s.blocks == 0) fail("stage with zero size");
  if (feature_dim == 0 || in_channels == 0) fail("zero dimension");
  if (input_size >> stages.size() == 0) {
    fail("input size " + std::to_string(input_size) + " too small for " +
         std::to_string(stages.size()) + " downsampling stages");
  }
}

std::vector<StageSpec> parse_stages(const std::string& text) {
  std::vector<StageSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto x = item.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument("no x");
      std::size_t pos1 = 0, pos2 = 0;
      const std::string ch = item.substr(0, x), bl = item.substr(x + 1);
      StageSpec s{std::stoul(ch, &pos1), std::stoul(bl, &pos2)};
      if (pos1 != ch.size() || pos2 != bl.size())
        throw std::invalid_argument("trailing");
      out.push_back(s);
    } catch (const std::logic_error&) {
      throw ValidationError("malformed stage list '" + text +
                            "', expected e.g. 16x1,32x2");
    }
  }
  if (out.empty()) throw ValidationError("empty stage list");
  return out;
}

std::string format_stages(const std::vector<StageSpec>& stages) {
  std::string s;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(stages[i].channels) + "x" +
         std::to_string(stages[i].blocks);
  }
  return s;
}

EncoderSpec teacher_spec() {
  return {"tiny-t", {{16, 1}, {32, 1}, {48, 1}}, 32, 128, 3};
}

EncoderSpec student_spec() {
  return {"tiny-s", {{16, 1}, {32, 1}, {64, 1}, {96, 1}}, 32, 128, 3};
}

EncoderSpec resolve_spec(const std::string& name,
                         const std::map<std::string, EncoderSpec>& custom) {
  if (auto it = custom.find(name); it != custom.end()) return it->second;
  if (name == "tiny-t") return teacher_spec();
  if (name == "tiny-s") return student_spec();
  throw ValidationError("unknown encoder spec '" + name + "'");
}

namespace layers {

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t k,
               std::size_t stride, Rng& rng)
    : weight_(he_uniform({out, in, k, k}, in * k * k, rng)),
      stride_(stride),
      padding_(k / 2) {}

Tensor Conv2d::forward(const Tensor& x) const {
  return conv2d(x, weight_, stride_, padding_);
}

void Conv2d::collect(const std::string& prefix, StateDict& out) const {
  out.emplace_back(prefix + ".weight", weight_);
}

Norm::Norm(std::size_t channels, const NormOptions& opts)
    : scale_(Tensor::full({channels}, 1.0f, true)),
      shift_(Tensor::zeros({channels}, true)),
      state_(NormState::make(channels, opts.momentum, opts.eps)) {}

Tensor Norm::forward(const Tensor& x, bool training) {
  return channel_norm(x, scale_, shift_, state_, training);
}

void Norm::collect(const std::string& prefix, StateDict& params,
                   StateDict& buffers) const {
  params.emplace_back(prefix + ".scale", scale_);
  params.emplace_back(prefix + ".shift", shift_);
  buffers.emplace_back(prefix + ".running_mean", state_.running_mean);
  buffers.emplace_back(prefix + ".running_var", state_.running_var);
}

Dense::Dense(std::size_t in, std::size_t out, Rng& rng)
    : weight_(he_uniform({in, out}, in, rng)),
      bias_(Tensor::zeros({out}, true)) {}

Tensor Dense::forward(const Tensor& x) const {
  return add(matmul(x, weight_), bias_);
}

void Dense::collect(const std::string& prefix, StateDict& out) const {
  out.emplace_back(prefix + ".weight", weight_);
  out.emplace_back(prefix + ".bias", bias_);
}

}  // namespace layers

Encoder::Encoder(EncoderSpec spec, Rng rng, NormOptions norm)
    : spec_(std::move(spec)) {
  spec_.validate();
  const std::size_t c0 = spec_.stages.front().channels;
  stem_ = layers::Conv2d(spec_.in_channels, c0, 3, 1, rng);
  stem_norm_ = layers::Norm(c0, norm);
  std::size_t in = c0;
  for (const auto& stage : spec_.stages) {
    std::vector<Block> blocks;
    for (std::size_t b = 0; b < stage.blocks; ++b) {
      const std::size_t stride = b == 0 ? 2 : 1;
      Block blk;
      blk.conv1 = layers::Conv2d(in, stage.channels, 3, stride, rng);
      blk.norm1 = layers::Norm(stage.channels, norm);
      blk.conv2 = layers::Conv2d(stage.channels, stage.channels, 3, 1, rng);
      blk.norm2 = layers::Norm(stage.channels, norm);
      if (stride != 1 || in != stage.channels) {
        blk.has_projection = true;
        blk.proj = layers::Conv2d(in, stage.channels, 1, stride, rng);
        blk.proj_norm = layers::Norm(stage.channels, norm);
      }
      blocks.push_back(std::move(blk));
      in = stage.channels;
    }
    stages_.push_back(std::move(blocks));
  }
  fc_ = layers::Dense(in, spec_.feature_dim, rng);
}

Tensor Encoder::forward(const Tensor& images, bool training) {
  if (images.ndim() != 4 || images.dim(1) != spec_.in_channels ||
      images.dim(2) != spec_.input_size || images.dim(3) != spec_.input_size) {
    throw ShapeError("encoder '" + spec_.name + "' expects [B," +
                     std::to_string(spec_.in_channels) + "," +
                     std::to_string(spec_.input_size) + "," +
                     std::to_string(spec_.input_size) + "], got " +
                     shape_str(images.shape()));
  }
  Tensor x = relu(stem_norm_.forward(stem_.forward(images), training));
  for (auto& blocks : stages_) {
    for (auto& blk : blocks) {
      Tensor h = relu(blk.norm1.forward(blk.conv1.forward(x), training));
      h = blk.norm2.forward(blk.conv2.forward(h), training);
      Tensor skip = blk.has_projection
                        ? blk.proj_norm.forward(blk.proj.forward(x), training)
                        : x;
      x = relu(add(h, skip));
    }
  }
  return fc_.forward(global_avg_pool(x));
}

void Encoder::collect(StateDict& params, StateDict& buffers) const {
  stem_.collect("encoder.stem.conv", params);
  stem_norm_.collect("encoder.stem.norm", params, buffers);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const auto& blk = stages_[s][b];
      const std::string p = "encoder.stage" + std::to_string(s) + ".block" +
                            std::to_string(b);
      blk.conv1.collect(p + ".conv1", params);
      blk.norm1.collect(p + ".norm1", params, buffers);
      blk.conv2.collect(p + ".conv2", params);
      blk.norm2.collect(p + ".norm2", params, buffers);
      if (blk.has_projection) {
        blk.proj.collect(p + ".proj", params);
        blk.proj_norm.collect(p + ".proj_norm", params, buffers);
      }
    }
  }
  fc_.collect("encoder.fc", params);
}

ParameterSet Encoder::parameters() const {
  StateDict params, buffers;
  collect(params, buffers);
  return to_parameter_set(params);
}

StateDict Encoder::state() const {
  StateDict params, buffers;
  collect(params, buffers);
  params.insert(params.end(), buffers.begin(), buffers.end());
  return params;
}

ProjectionHead::ProjectionHead(std::size_t feature_dim, std::size_t hidden_dim,
                               std::size_t output_dim, Rng rng, NormOptions norm)
    : fc1_(feature_dim, hidden_dim, rng),
      fc2_(hidden_dim, output_dim, rng),
      norm_(hidden_dim, norm),
      output_dim_(output_dim) {}

Tensor ProjectionHead::forward(const Tensor& features, bool training) {
  return fc2_.forward(relu(norm_.forward(fc1_.forward(features), training)));
}

ParameterSet ProjectionHead::parameters() const {
  StateDict params, buffers;
  fc1_.collect("projection.fc1", params);
  norm_.collect("projection.norm", params, buffers);
  fc2_.collect("projection.fc2", params);
  return to_parameter_set(params);
}

StateDict ProjectionHead::state() const {
  StateDict params, buffers;
  fc1_.collect("projection.fc1", params);
  norm_.collect("projection.norm", params, buffers);
  fc2_.collect("projection.fc2", params);
  params.insert(params.end(), buffers.begin(), buffers.end());
  return params;
}

ClassifierHead::ClassifierHead(std::size_t feature_dim, Rng rng)
    : fc_(feature_dim, 1, rng) {}

Tensor ClassifierHead::forward(const Tensor& features) const {
  Tensor logits = fc_.forward(features);
  return sigmoid(reshape(logits, {logits.dim(0)}));
}

ParameterSet ClassifierHead::parameters() const {
  return to_parameter_set(state());
}

StateDict ClassifierHead::state() const {
  StateDict s;
  fc_.collect("classifier.fc", s);
  return s;
}

EmbeddingBatch forward_pretrain(Encoder& encoder, ProjectionHead& head,
                                const Tensor& views, bool training) {
  if (views.ndim() != 4 || views.dim(0) % 2 != 0) {
    throw ValidationError(
        "forward_pretrain: expected an even number of views, got shape " +
        shape_str(views.shape()));
  }
  return EmbeddingBatch{head.forward(encoder.forward(views, training), training)};
}

Tensor forward_classify(Encoder& encoder, const ClassifierHead& head,
                        const Tensor& images, bool training) {
  return head.forward(encoder.forward(images, training));
}

void load_state(const StateDict& target, const StateDict& source,
                const std::string& prefix) {
  std::unordered_map<std::string, const Tensor*> index;
  for (const auto& [name, t] : source) index.emplace(name, &t);
  for (const auto& [name, t] : target) {
    auto it = index.find(prefix + name);
    if (it == index.end()) {
      throw ValidationError("state is missing tensor '" + prefix + name + "'");
    }
    const Tensor& src = *it->second;
    if (src.shape() != t.shape()) {
      throw ShapeError("tensor '" + name + "' has shape " +
                       shape_str(src.shape()) + ", model expects " +
                       shape_str(t.shape()));
    }
    Tensor dst = t;
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
}

}  // namespace ssld
