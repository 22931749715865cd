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

#include <algorithm>
#include <vector>

#include "doctest.h"
#include "ssld/error.hpp"
#include "ssld/models.hpp"
#include "test_util.hpp"

using namespace ssld;
using ssld::testing::random_tensor;
using ssld::testing::to_vec;

namespace {

// Parameter count by enumeration of the architecture rules, independent of
// the Encoder class: 3x3 convs (no bias), norm scale+shift, 1x1 projection
// on every downsampling block, dense head with bias.
std::size_t count_params(const EncoderSpec& s) {
  std::size_t n = 0;
  std::size_t in = s.stages[0].channels;
  n += s.in_channels * in * 9 + 2 * in;
  for (const auto& st : s.stages) {
    for (std::size_t b = 0; b < st.blocks; ++b) {
      const std::size_t c = st.channels;
      n += in * c * 9 + 2 * c + c * c * 9 + 2 * c;
      if (b == 0 || in != c) n += in * c + 2 * c;
      in = c;
    }
  }
  return n + in * s.feature_dim + s.feature_dim;
}

}  // namespace

TEST_CASE("encoder shape contract and parameter counts") {
  Encoder teacher(teacher_spec(), Rng(0));
  Rng rng(1);
  Tensor x = random_tensor({8, 3, 32, 32}, rng, 0.0, 1.0);
  Tensor h = teacher.forward(x, true);
  CHECK(h.shape() == Shape{8, 128});

  Encoder student(student_spec(), Rng(0));
  const auto pt = teacher.parameter_count(), ps = student.parameter_count();
  CHECK(pt == count_params(teacher_spec()));
  CHECK(ps == count_params(student_spec()));
  CHECK(ps > pt);
  CHECK(teacher_spec().stages.size() == 3);
  CHECK(student_spec().stages.size() == 4);
  MESSAGE("tiny-t params: " << pt << ", tiny-s params: " << ps);
  CHECK(pt > 40000);
  CHECK(pt < 90000);
  CHECK(ps > 150000);
  CHECK(ps < 260000);
}

TEST_CASE("same seed gives bit-identical parameters") {
  Encoder a(teacher_spec(), Rng(5)), b(teacher_spec(), Rng(5)),
      c(teacher_spec(), Rng(6));
  auto sa = a.state(), sb = b.state(), sc = c.state();
  REQUIRE(sa.size() == sb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].first == sb[i].first);
    CHECK(to_vec(sa[i].second) == to_vec(sb[i].second));
    any_diff |= to_vec(sa[i].second) != to_vec(sc[i].second);
  }
  CHECK(any_diff);
}

TEST_CASE("invalid specs") {
  EncoderSpec s = teacher_spec();
  s.stages.clear();
  CHECK_THROWS_AS(Encoder(s, Rng(0)), ValidationError);
  s = teacher_spec();
  s.input_size = 4;
  CHECK_THROWS_AS(Encoder(s, Rng(0)), ValidationError);
  s = teacher_spec();
  s.feature_dim = 0;
  CHECK_THROWS_AS(Encoder(s, Rng(0)), ValidationError);
  CHECK_THROWS_AS(resolve_spec("resnet-50"), ValidationError);
  CHECK_THROWS_AS(parse_stages("16x"), ValidationError);
  CHECK_THROWS_AS(parse_stages("16,32"), ValidationError);
  CHECK(format_stages(parse_stages("8x1,16x2")) == "8x1,16x2");
}

TEST_CASE("forward_pretrain pairing") {
  Encoder enc(teacher_spec(), Rng(0));
  ProjectionHead head(128, 128, 64, Rng(1));
  Rng rng(2);
  Tensor views = random_tensor({4, 3, 32, 32}, rng, 0.0, 1.0);
  auto batch = forward_pretrain(enc, head, views);
  CHECK(batch.z.shape() == Shape{4, 64});
  CHECK(batch.pairs() == 2);
  CHECK(EmbeddingBatch::partner(0) == 1);
  CHECK(EmbeddingBatch::partner(3) == 2);
  CHECK(EmbeddingBatch::partner(5) == 4);
  CHECK_THROWS_AS(forward_pretrain(enc, head, random_tensor({3, 3, 32, 32}, rng)),
                  ValidationError);

  // Two identical (zero) views map to identical embeddings.
  Tensor zeros = Tensor::zeros({2, 3, 32, 32});
  auto z = forward_pretrain(enc, head, zeros, false).z;
  for (std::size_t j = 0; j < 64; ++j) CHECK(z.data()[j] == z.data()[64 + j]);
}

TEST_CASE("forward_classify") {
  Encoder enc(teacher_spec(), Rng(0));
  ClassifierHead head(128, Rng(1));
  Rng rng(3);
  Tensor x = random_tensor({6, 3, 32, 32}, rng, 0.0, 1.0);
  Tensor p = forward_classify(enc, head, x, true);
  CHECK(p.shape() == Shape{6});
  for (float v : p.data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  SUBCASE("zero head gives one half") {
    for (auto& v : head.dense().weight().data()) v = 0.0f;
    Tensor q = forward_classify(enc, head, x, false);
    for (float v : q.data()) CHECK(v == 0.5f);
  }
  SUBCASE("eval mode is deterministic and batch-order invariant") {
    Tensor a = forward_classify(enc, head, x, false);
    Tensor b = forward_classify(enc, head, x, false);
    CHECK(to_vec(a) == to_vec(b));
    // Reverse the batch.
    std::vector<float> rev(x.numel());
    const std::size_t per = 3 * 32 * 32;
    for (std::size_t i = 0; i < 6; ++i)
      std::copy_n(x.data().data() + i * per, per, rev.data() + (5 - i) * per);
    Tensor r = forward_classify(enc, head, Tensor::from(x.shape(), rev), false);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(r.data()[5 - i] == doctest::Approx(a.data()[i]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(forward_classify(enc, head, Tensor::zeros({2, 3, 16, 16}), false),
                  ShapeError);
}

TEST_CASE("swapping heads leaves the encoder untouched") {
  Encoder enc(teacher_spec(), Rng(0));
  auto before = enc.state();
  std::vector<std::vector<float>> snapshot;
  for (auto& [n, t] : before) snapshot.push_back(to_vec(t));
  {
    ProjectionHead proj(128, 128, 64, Rng(1));
    (void)proj;
  }
  ClassifierHead cls(128, Rng(2));
  auto after = enc.state();
  for (std::size_t i = 0; i < after.size(); ++i)
    CHECK(to_vec(after[i].second) == snapshot[i]);
}

TEST_CASE("load_state copies by name with shape checks") {
  Encoder a(teacher_spec(), Rng(1)), b(teacher_spec(), Rng(2));
  load_state(b.state(), a.state());
  auto sa = a.state(), sb = b.state();
  for (std::size_t i = 0; i < sa.size(); ++i)
    CHECK(to_vec(sa[i].second) == to_vec(sb[i].second));
  Encoder s(student_spec(), Rng(1));
  CHECK_THROWS(load_state(s.state(), a.state()));
}
