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

#include "ssld/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssld/error.hpp"

namespace ssld {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "FAIL") << " max_error=" << max_error;
  for (std::size_t i = 0; i < failures.size() && i < 5; ++i) {
    const auto& m = failures[i];
    os << "\n  input " << m.input << " coord " << m.index
       << ": analytic=" << m.analytic << " numeric=" << m.numeric
       << " err=" << m.error;
  }
  if (failures.size() > 5) os << "\n  ... " << failures.size() - 5 << " more";
  return os.str();
}

GradCheckReport gradient_check(const std::function<Tensor()>& f,
                               std::vector<Tensor> inputs, double h,
                               double tol) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor loss = f();
  if (loss.numel() != 1) {
    throw ShapeError("gradient_check: function must return a scalar");
  }
  backward(loss);
  std::vector<std::vector<float>> analytic;
  for (auto& t : inputs) {
    analytic.emplace_back(t.has_grad() ? std::vector<float>(t.grad().begin(),
                                                            t.grad().end())
                                       : std::vector<float>(t.numel(), 0.0f));
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float saved = values[i];
      // The float-rounded step is what the function actually sees.
      const float hi = static_cast<float>(saved + h);
      const float lo = static_cast<float>(saved - h);
      values[i] = hi;
      const double up = f().item();
      values[i] = lo;
      const double down = f().item();
      values[i] = saved;
      const double numeric =
          (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      report.max_error = std::max(report.max_error, err);
      if (err > tol) {
        report.passed = false;
        report.failures.push_back({k, i, a, numeric, err});
      }
    }
  }
  return report;
}

GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f,
                               Tensor point, double h, double tol) {
  return gradient_check([&f, point] { return f(point); }, {point}, h, tol);
}

}  // namespace ssld
