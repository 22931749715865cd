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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "ssld/error.hpp"
#include "ssld/losses.hpp"
#include "ssld/ops.hpp"
#include "ssld/rng.hpp"
#include "test_util.hpp"

using namespace ssld;
using ssld::testing::random_tensor;

namespace {

// Literal evaluation over all ordered positive pairs, double precision, no
// max-subtraction.
double nt_xent_oracle(const Tensor& z, double tau) {
  const std::size_t n = z.dim(0), d = z.dim(1);
  auto sim = [&](std::size_t a, std::size_t b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < d; ++k) {
      double x = z.data()[a * d + k], y = z.data()[b * d + k];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    return dot / std::sqrt(na * nb);
  };
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = (i % 2 == 0) ? i + 1 : i - 1;
    double den = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) den += std::exp(sim(i, k) / tau);
    total += -std::log(std::exp(sim(i, j) / tau) / den);
  }
  return total / static_cast<double>(n);
}

double bce_oracle(const std::vector<double>& p, const std::vector<double>& y) {
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    acc += -(y[i] * std::log(p[i]) + (1 - y[i]) * std::log(1 - p[i]));
  return acc / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("cosine_similarity") {
  std::vector<float> x{1, 0}, y{0, 1}, xy{1, 1}, zero{0, 0};
  CHECK(cosine_similarity(x, x) == doctest::Approx(1.0));
  CHECK(cosine_similarity(x, y) == doctest::Approx(0.0));
  CHECK(cosine_similarity(xy, x) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(cosine_similarity(xy, x) == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK_THROWS_AS(cosine_similarity(zero, x), ValidationError);
}

TEST_CASE("nt_xent examples") {
  SUBCASE("identical embeddings give ln 3") {
    Tensor z = Tensor::full({4, 3}, 0.7f);
    double loss = nt_xent({z}, {1.0}).item();
    CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-6));
    CHECK(std::round(loss * 1e4) / 1e4 == doctest::Approx(1.0986));
  }
  SUBCASE("orthogonal pairs") {
    Tensor z = Tensor::from({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    const double e = std::exp(1.0);
    const double want = -std::log(e / (e + 2.0));
    CHECK(nt_xent({z}, {1.0}).item() == doctest::Approx(want).epsilon(1e-6));
    CHECK(std::round(want * 1e4) / 1e4 == doctest::Approx(0.5514));
    CHECK(nt_xent_oracle(z, 1.0) == doctest::Approx(want));
  }
  SUBCASE("low temperature drives the loss to zero") {
    Tensor z = Tensor::from({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    CHECK(nt_xent({z}, {0.05}).item() < 1e-6);
    CHECK(nt_xent({z}, {0.05}).item() < nt_xent({z}, {0.5}).item());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(nt_xent({Tensor::full({2, 3}, 1.0f)}, {0.5}),
                    ValidationError);
    CHECK_THROWS_AS(nt_xent({Tensor::full({5, 3}, 1.0f)}, {0.5}),
                    ValidationError);
    CHECK_THROWS_AS(nt_xent({Tensor::full({4, 3}, 1.0f)}, {0.0}),
                    ValidationError);
    CHECK_THROWS_AS(nt_xent({Tensor::full({4, 3}, 1.0f)}, {-1.0}),
                    ValidationError);
  }
}

TEST_CASE("nt_xent matches brute-force oracle") {
  Rng rng(99);
  for (std::size_t n : {2, 4, 8})
    for (std::size_t d : {3, 8, 64})
      for (double tau : {0.1, 0.5, 1.0}) {
        Tensor z = random_tensor({2 * n, d}, rng);
        double got = nt_xent({z}, {tau}).item();
        double want = nt_xent_oracle(z, tau);
        CAPTURE(n);
        CAPTURE(d);
        CAPTURE(tau);
        CHECK(std::abs(got - want) <= 1e-4 * std::abs(want));
      }
}

TEST_CASE("nt_xent is scale invariant") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor z = random_tensor({8, 6}, rng);
    double base = nt_xent({z}, {0.5}).item();
    for (float c : {0.5f, 3.0f}) {
      double scaled = nt_xent({scale(z, c)}, {0.5}).item();
      CHECK(std::abs(scaled - base) <= 1e-5);
    }
  }
}

TEST_CASE("bce examples") {
  const double eps = kDefaultBceEps;
  CHECK(bce(Tensor::from({1}, {1.0f - static_cast<float>(eps)}),
            Tensor::from({1}, {1.0f}))
            .item() < 1e-6);
  CHECK(bce(Tensor::from({1}, {0.5f}), Tensor::from({1}, {1.0f})).item() ==
        doctest::Approx(std::log(2.0)));
  double want = bce_oracle({0.9, 0.2}, {1, 0});
  CHECK(want == doctest::Approx(0.1643).epsilon(1e-3));
  CHECK(bce(Tensor::from({2}, {0.9f, 0.2f}), Tensor::from({2}, {1, 0}))
            .item() == doctest::Approx(want).epsilon(1e-6));
  // Clamping keeps saturated probabilities finite.
  CHECK(std::isfinite(
      bce(Tensor::from({2}, {0.0f, 1.0f}), Tensor::from({2}, {1, 0})).item()));
  CHECK_THROWS_AS(bce(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST_CASE("bce is non-negative and minimized at p == y") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    float y = static_cast<float>(rng.uniform(0.05, 0.95));
    float p = static_cast<float>(rng.uniform(0.01, 0.99));
    Tensor yt = Tensor::from({1}, {y});
    double at_p = bce(Tensor::from({1}, {p}), yt).item();
    double at_y = bce(Tensor::from({1}, {y}), yt).item();
    CHECK(at_p >= 0.0);
    CHECK(at_y <= at_p + 1e-6);
  }
}
