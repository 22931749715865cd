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

#include "ssld/gradsuite.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include "ssld/gradcheck.hpp"
#include "ssld/losses.hpp"
#include "ssld/ops.hpp"
#include "ssld/rng.hpp"

namespace ssld {

namespace {

using Op = std::function<Tensor(const std::vector<Tensor>&)>;
using Inputs = std::function<std::vector<Tensor>(Rng&)>;

// Uniform in [lo, hi], pushed at least min_abs away from zero.
Tensor uniform_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                      double min_abs = 0.0) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) {
    double d = rng.uniform(lo, hi);
    if (std::abs(d) < min_abs) d = d < 0 ? d - min_abs : d + min_abs;
    x = static_cast<float>(d);
  }
  return Tensor::from(std::move(shape), std::move(v));
}

// Distinct values `gap` apart, so a max never switches under perturbation.
Tensor spaced_tensor(Shape shape, Rng& rng, double gap) {
  std::vector<std::size_t> order(shape_numel(shape));
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<float> v(order.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<float>(static_cast<double>(order[i]) * gap - 1.0);
  return Tensor::from(std::move(shape), std::move(v));
}

struct Case {
  std::string name;
  Op op;
  Inputs inputs;
  bool scalar = false;  // op already returns the loss
};

std::vector<Case> cases() {
  std::vector<Case> c;
  auto add_case = [&](std::string name, Op op, Inputs in, bool scalar = false) {
    c.push_back({std::move(name), std::move(op), std::move(in), scalar});
  };
  auto one = [](Shape s, double lo = -1, double hi = 1, double min_abs = 0) {
    return [=](Rng& r) { return std::vector{uniform_tensor(s, r, lo, hi, min_abs)}; };
  };
  auto two = [](Shape a, Shape b) {
    return [=](Rng& r) {
      auto x = uniform_tensor(a, r);
      return std::vector{x, uniform_tensor(b, r)};
    };
  };

  add_case("matmul", [](auto& in) { return matmul(in[0], in[1]); }, two({3, 4}, {4, 2}));
  add_case("transpose", [](auto& in) { return transpose(in[0]); }, one({3, 5}));
  add_case("add", [](auto& in) { return add(in[0], in[1]); }, two({2, 3}, {2, 3}));
  add_case("add_bias", [](auto& in) { return add(in[0], in[1]); }, two({4, 3}, {3}));
  add_case("sub", [](auto& in) { return sub(in[0], in[1]); }, two({5}, {5}));
  add_case("mul", [](auto& in) { return mul(in[0], in[1]); }, two({2, 4}, {2, 4}));
  add_case("scale", [](auto& in) { return scale(in[0], 2.5f); }, one({6}));
  add_case("affine", [](auto& in) { return affine(in[0], -1.5f, 0.3f); }, one({6}));
  add_case("relu", [](auto& in) { return relu(in[0]); }, one({3, 4}, -1, 1, 0.05));
  add_case("sigmoid", [](auto& in) { return sigmoid(in[0]); }, one({3, 4}, -4, 4));
  add_case("log", [](auto& in) { return log(in[0]); }, one({5}, 0.5, 3.0));
  add_case("clamp", [](auto& in) { return clamp(in[0], -0.5f, 0.5f); }, [](Rng& r) {
    auto t = uniform_tensor({8}, r);
    for (auto& v : t.data())
      if (std::abs(std::abs(v) - 0.5f) < 0.05f) v *= 0.5f;
    return std::vector{t};
  });
  add_case("sum", [](auto& in) { return sum(in[0]); }, one({2, 3, 2}));
  add_case("mean", [](auto& in) { return mean(in[0]); }, one({7}));
  add_case("reshape", [](auto& in) { return reshape(in[0], {3, 4}); }, one({2, 6}));
  add_case("flatten", [](auto& in) { return flatten(in[0]); }, one({2, 2, 2, 3}));
  add_case("maxpool2d", [](auto& in) { return maxpool2d(in[0], 2); },
           [](Rng& r) { return std::vector{spaced_tensor({2, 2, 4, 5}, r, 0.05)}; });
  add_case("global_avg_pool", [](auto& in) { return global_avg_pool(in[0]); },
           one({2, 3, 3, 2}));

  for (bool training : {true, false}) {
    for (bool spatial : {true, false}) {
      auto state = std::make_shared<NormState>(NormState::make(3));
      if (!training) {
        state->running_mean = Tensor::from({3}, {0.2f, -0.1f, 0.5f});
        state->running_var = Tensor::from({3}, {1.5f, 0.7f, 2.0f});
      }
      add_case(std::string("channel_norm_") + (training ? "train" : "eval") +
                   (spatial ? "_4d" : "_2d"),
               [state, training](auto& in) {
                 return channel_norm(in[0], in[1], in[2], *state, training);
               },
               [spatial](Rng& r) {
                 Shape s = spatial ? Shape{3, 3, 2, 2} : Shape{5, 3};
                 auto x = uniform_tensor(s, r, -2, 2);
                 auto g = uniform_tensor({3}, r, 0.5, 1.5);
                 return std::vector{x, g, uniform_tensor({3}, r)};
               });
    }
  }

  struct ConvCfg {
    Shape in, k;
    std::size_t stride, pad;
  };
  for (const ConvCfg& cc : {ConvCfg{{2, 2, 5, 5}, {3, 2, 3, 3}, 1, 1},
                            ConvCfg{{1, 3, 6, 6}, {2, 3, 3, 3}, 2, 1},
                            ConvCfg{{2, 2, 4, 4}, {2, 2, 1, 1}, 2, 0}}) {
    add_case("conv2d_k" + std::to_string(cc.k[2]) + "_s" + std::to_string(cc.stride),
             [cc](auto& in) { return conv2d(in[0], in[1], cc.stride, cc.pad); },
             two(cc.in, cc.k));
  }

  add_case("normalize_rows", [](auto& in) { return normalize_rows(in[0]); },
           one({4, 3}, -1, 1, 0.1));
  add_case("row_logsumexp", [](auto& in) { return row_logsumexp(in[0], false); },
           one({4, 4}, -3, 3));
  add_case("row_logsumexp_offdiag", [](auto& in) { return row_logsumexp(in[0], true); },
           one({4, 4}, -3, 3));
  add_case("gather_cols",
           [](auto& in) { return gather_cols(in[0], std::vector<std::size_t>{2, 0, 1}); },
           one({3, 3}));

  add_case("nt_xent", [](auto& in) { return nt_xent({in[0]}, {0.5}); }, one({4, 5}), true);
  add_case("bce",
           [](auto& in) { return bce(in[0], Tensor::from({6}, {1, 0, 1, 1, 0, 0})); },
           one({6}, 0.05, 0.95), true);
  return c;
}

}  // namespace

std::vector<GradCaseResult> run_gradient_suite(int seeds, double h, double tol) {
  std::vector<GradCaseResult> results;
  for (const auto& c : cases()) {
    GradCaseResult res;
    res.name = c.name;
    res.seeds = seeds;
    for (int seed = 0; seed < seeds; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed));
      auto inputs = c.inputs(rng);
      std::function<Tensor()> f;
      if (c.scalar) {
        f = [&] { return c.op(inputs); };
      } else {
        // Random projection to a scalar so every output coordinate counts.
        Tensor probe;
        {
          NoGradGuard g;
          probe = c.op(inputs);
        }
        Tensor w = uniform_tensor({probe.numel()}, rng);
        f = [&, w] { return sum(mul(reshape(c.op(inputs), {w.numel()}), w)); };
      }
      auto report = gradient_check(f, inputs, h, tol);
      res.max_error = std::max(res.max_error, report.max_error);
      if (!report.passed) {
        if (res.failed == 0)
          res.first_failure = "seed " + std::to_string(seed) + ": " + report.summary();
        ++res.failed;
      }
    }
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace ssld
