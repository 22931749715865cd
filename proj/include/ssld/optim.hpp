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
#include <string>
#include <vector>

#include "ssld/tensor.hpp"

namespace ssld {

struct Parameter {
  std::string name;
  Tensor tensor;                        // requires_grad = true
  std::vector<float> momentum_buffer;   // empty until the first step
};

/// Named trainable tensors of a model, in registration order. Names are
/// unique. The stored tensors share storage with the owning layers.
class ParameterSet {
 public:
  // Throws ValidationError on a duplicate name.
  void add(std::string name, Tensor tensor);
  void extend(const ParameterSet& other);

  std::size_t size() const { return params_.size(); }
  std::size_t count_values() const;
  bool contains(const std::string& name) const;
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter>::iterator begin() { return params_.begin(); }
  std::vector<Parameter>::iterator end() { return params_.end(); }
  std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

struct SgdOptions {
  float lr = 0.1f;
  float weight_decay = 0.0f;
  float momentum = 0.9f;
};

/// v <- momentum * v + grad + weight_decay * w;  w <- w - lr * v.
/// Gradients are left in place. Throws ValidationError naming the first
/// parameter without a gradient.
void sgd_step(ParameterSet& params, const SgdOptions& opts);

}  // namespace ssld
