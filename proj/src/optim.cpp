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

#include "ssld/optim.hpp"

#include <algorithm>

#include "ssld/error.hpp"

namespace ssld {

void ParameterSet::add(std::string name, Tensor tensor) {
  if (contains(name)) {
    throw ValidationError("duplicate parameter name '" + name + "'");
  }
  tensor.set_requires_grad(true);
  params_.push_back(Parameter{std::move(name), std::move(tensor), {}});
}

void ParameterSet::extend(const ParameterSet& other) {
  for (const auto& p : other) add(p.name, p.tensor);
}

std::size_t ParameterSet::count_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter& p) { return p.name == name; });
}

const Parameter& ParameterSet::at(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw ValidationError("no parameter named '" + name + "'");
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void sgd_step(ParameterSet& params, const SgdOptions& opts) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) {
      throw ValidationError("sgd_step: parameter '" + p.name +
                            "' has no gradient");
    }
  }
  for (auto& p : params) {
    auto w = p.tensor.data();
    auto g = p.tensor.grad();
    if (p.momentum_buffer.empty()) p.momentum_buffer.assign(w.size(), 0.0f);
    auto& v = p.momentum_buffer;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = opts.momentum * v[i] + g[i] + opts.weight_decay * w[i];
      w[i] -= opts.lr * v[i];
    }
  }
}

}  // namespace ssld
