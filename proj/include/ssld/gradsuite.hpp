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

#include <string>
#include <vector>

namespace ssld {

struct GradCaseResult {
  std::string name;
  int seeds = 0;
  int failed = 0;       // seeds with at least one bad coordinate
  double max_error = 0;
  std::string first_failure;

  bool passed() const { return failed == 0; }
};

/// Finite-difference check of every differentiable primitive and both
/// composite losses, one case per op, each over `seeds` random points.
std::vector<GradCaseResult> run_gradient_suite(int seeds = 20, double h = 1e-3,
                                               double tol = 1e-2);

}  // namespace ssld
