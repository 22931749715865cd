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
#include <functional>
#include <string>
#include <vector>

#include "ssld/tensor.hpp"

namespace ssld {

struct GradMismatch {
  std::size_t input = 0;   // index into the checked inputs
  std::size_t index = 0;   // flat coordinate
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;      // |a - n| / max(1, |a|, |n|)
};

struct GradCheckReport {
  bool passed = true;
  double max_error = 0.0;
  std::vector<GradMismatch> failures;

  std::string summary() const;
};

/// Compares the analytic gradient of a scalar function against central
/// differences (f(x+h) - f(x-h)) / 2h, taken in double precision from the
/// float forward values. A coordinate passes when
/// |a - n| <= tol * max(1, |a|, |n|).
///
/// `f` must rebuild its graph from `inputs` on every call; the inputs are
/// perturbed in place and restored afterwards.
GradCheckReport gradient_check(const std::function<Tensor()>& f,
                               std::vector<Tensor> inputs, double h = 1e-3,
                               double tol = 1e-2);

GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f,
                               Tensor point, double h = 1e-3,
                               double tol = 1e-2);

}  // namespace ssld
