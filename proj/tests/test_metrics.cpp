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
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ssld/error.hpp"
#include "ssld/metrics.hpp"
#include "ssld/rng.hpp"

using namespace ssld;

namespace {

// Every positive/negative pair, one point per win and half per tie.
double pairwise_auc(const std::vector<float>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      if (s[i] > s[j]) wins += 1;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct Instance {
  std::vector<float> scores;
  std::vector<int> labels;
};

// Scores drawn from a small grid so ties are common.
Instance random_instance(Rng& rng) {
  Instance in;
  const std::size_t n = 2 + rng.uniform_index(60);
  const std::size_t levels = 1 + rng.uniform_index(12);
  for (std::size_t i = 0; i < n; ++i) {
    in.scores.push_back(static_cast<float>(rng.uniform_index(levels)) / 16.0f);
    in.labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<float>{0.9f, 0.8f, 0.2f, 0.1f}, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auc(std::vector<float>{0.9f, 0.8f, 0.2f, 0.1f}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(auc(std::vector<float>{0.1f, 0.4f, 0.35f, 0.8f}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(auc(std::vector<float>{0.5f, 0.5f, 0.5f}, std::vector<int>{1, 0, 1}) == 0.5);
}

TEST_CASE("auc errors") {
  CHECK_THROWS_AS(auc(std::vector<float>{0.1f, 0.2f}, std::vector<int>{1, 1}), ValidationError);
  CHECK_THROWS_AS(auc(std::vector<float>{0.1f}, std::vector<int>{1, 0}), ValidationError);
  CHECK_THROWS_AS(auc(std::vector<float>{0.1f, 0.2f}, std::vector<int>{1, 2}), ValidationError);
  CHECK_THROWS_AS(roc_curve(std::vector<float>{0.1f}, std::vector<int>{0}), ValidationError);
}

TEST_CASE("auc matches exhaustive pair counting") {
  Rng rng(2024);
  for (int k = 0; k < 100; ++k) {
    auto in = random_instance(rng);
    CAPTURE(k);
    const double a = auc(in.scores, in.labels);
    CHECK(a == pairwise_auc(in.scores, in.labels));
    CHECK(std::abs(trapezoid_area(roc_curve(in.scores, in.labels)) - a) <= 1e-12);
    std::vector<int> flipped;
    for (int y : in.labels) flipped.push_back(1 - y);
    CHECK(std::abs(a + auc(in.scores, flipped) - 1.0) <= 1e-12);
  }
}

TEST_CASE("auc is invariant under increasing transforms") {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    auto in = random_instance(rng);
    std::vector<float> cube, lin;
    for (float s : in.scores) {
      cube.push_back(s * s * s);
      lin.push_back(2.0f * s - 0.3f);
    }
    const double a = auc(in.scores, in.labels);
    CHECK(auc(cube, in.labels) == a);
    CHECK(auc(lin, in.labels) == a);
  }
}

TEST_CASE("roc curve shape") {
  auto perfect = roc_curve(std::vector<float>{0.9f, 0.8f, 0.2f, 0.1f},
                           std::vector<int>{1, 1, 0, 0});
  bool through_corner = false;
  for (auto& p : perfect) through_corner |= (p.fpr == 0.0 && p.tpr == 1.0);
  CHECK(through_corner);

  auto flat = roc_curve(std::vector<float>{0.3f, 0.3f, 0.3f, 0.3f},
                        std::vector<int>{1, 0, 0, 1});
  REQUIRE(flat.size() == 2);
  CHECK(flat.front().fpr == 0.0);
  CHECK(flat.back().tpr == 1.0);
  CHECK(trapezoid_area(flat) == 0.5);

  Rng rng(9);
  auto in = random_instance(rng);
  auto curve = roc_curve(in.scores, in.labels);
  CHECK(curve.front().fpr == 0.0);
  CHECK(curve.front().tpr == 0.0);
  CHECK(curve.back().fpr == 1.0);
  CHECK(curve.back().tpr == 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].fpr >= curve[i - 1].fpr);
    CHECK(curve[i].tpr >= curve[i - 1].tpr);
  }
}

TEST_CASE("accuracy") {
  CHECK(accuracy(std::vector<float>{0.9f, 0.1f}, std::vector<int>{1, 0}) == 1.0);
  CHECK(accuracy(std::vector<float>{0.9f, 0.1f}, std::vector<int>{0, 1}) == 0.0);
  CHECK(accuracy(std::vector<float>{0.6f, 0.4f}, std::vector<int>{1, 1}) == 0.5);
  CHECK(accuracy(std::vector<float>{0.5f}, std::vector<int>{1}) == 1.0);
  CHECK_THROWS_AS(accuracy(std::vector<float>{}, std::vector<int>{}), ValidationError);
}

TEST_CASE("report formats") {
  EvalReport r;
  r.models.push_back(evaluate_scores("teacher", std::vector<float>{0.9f, 0.2f, 0.6f},
                                     std::vector<int>{1, 0, 0}));
  std::ostringstream csv, table;
  write_report_csv(csv, r);
  CHECK(csv.str() == "model,auc,accuracy,n_test\nteacher,1.000000,0.666667,3\n");
  write_report_table(table, r);
  CHECK(table.str().find("teacher") != std::string::npos);
  CHECK(r.at("teacher").n_test == 3);
  CHECK_THROWS_AS(r.at("student"), ValidationError);
}
