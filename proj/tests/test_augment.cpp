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
#include "ssld/augment.hpp"
#include "ssld/error.hpp"

using namespace ssld;

namespace {

Image random_image(Rng& rng, std::size_t c = 3, std::size_t h = 12,
                   std::size_t w = 10) {
  Image img(c, h, w);
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]));
  return m;
}

AugmentationPolicy flip_only(double p) {
  auto pol = AugmentationPolicy::identity();
  pol.hflip_prob = p;
  return pol;
}

}  // namespace

TEST_CASE("identity policy returns the input") {
  Rng rng(1);
  Image img = random_image(rng);
  CHECK(augment(img, AugmentationPolicy::identity(), Rng(3)) == img);
  auto [a, b] = make_view_pair(img, AugmentationPolicy::identity(), Rng(4));
  CHECK(a == img);
  CHECK(b == img);
}

TEST_CASE("certain flip mirrors every row") {
  Rng rng(2);
  Image img = random_image(rng);
  Image out = augment(img, flip_only(1.0), Rng(0));
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        CHECK(out.at(c, y, x) == img.at(c, y, img.width - 1 - x));
}

TEST_CASE("strong policy is deterministic per seed") {
  Rng rng(3);
  Image img = random_image(rng, 3, 32, 32);
  auto strong = AugmentationPolicy::strong();
  CHECK(augment(img, strong, Rng(9)) == augment(img, strong, Rng(9)));
  CHECK_FALSE(augment(img, strong, Rng(9)) == augment(img, strong, Rng(10)));
  auto [a1, b1] = make_view_pair(img, strong, Rng(5));
  auto [a2, b2] = make_view_pair(img, strong, Rng(5));
  CHECK(a1 == a2);
  CHECK(b1 == b2);
  CHECK_FALSE(a1 == b1);
}

TEST_CASE("outputs stay in range with the input shape") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Image img = random_image(rng, 3, 8 + rng.uniform_index(10),
                             8 + rng.uniform_index(10));
    for (auto pol : {AugmentationPolicy::strong(), AugmentationPolicy::weak()}) {
      Image out = augment(img, pol, rng.substream(trial));
      CHECK(out.channels == img.channels);
      CHECK(out.height == img.height);
      CHECK(out.width == img.width);
      for (float p : out.pixels) {
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
      }
    }
  }
}

TEST_CASE("colour operations") {
  Rng rng(5);
  Image img = random_image(rng);
  SUBCASE("neutral factors are identities") {
    CHECK(adjust_brightness(img, 1.0) == img);
    CHECK(max_abs_diff(adjust_contrast(img, 1.0), img) <= 1e-6);
    CHECK(max_abs_diff(adjust_saturation(img, 1.0), img) <= 1e-6);
    CHECK(max_abs_diff(adjust_hue(img, 0.0), img) <= 1e-6);
    CHECK(max_abs_diff(adjust_hue(img, 1.0), img) <= 1e-6);
    CHECK(rotate(img, 0.0) == img);
  }
  SUBCASE("brightness scales and clamps") {
    Image out = adjust_brightness(img, 1.5);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      CHECK(out.pixels[i] ==
            doctest::Approx(std::min(1.0, img.pixels[i] * 1.5)));
  }
  SUBCASE("zero contrast collapses to the luma mean") {
    Image out = adjust_contrast(img, 0.0);
    double mean = 0;
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        mean += 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) +
                0.114 * img.at(2, y, x);
    mean /= static_cast<double>(img.height * img.width);
    for (float p : out.pixels) CHECK(p == doctest::Approx(mean));
  }
  SUBCASE("zero saturation gives grey pixels") {
    Image out = adjust_saturation(img, 0.0);
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        CHECK(out.at(0, y, x) == doctest::Approx(out.at(1, y, x)));
        CHECK(out.at(1, y, x) == doctest::Approx(out.at(2, y, x)));
      }
  }
  SUBCASE("hue rotation by a third cycles primaries") {
    Image red(3, 1, 1);
    red.at(0, 0, 0) = 1.0f;
    Image out = adjust_hue(red, 1.0 / 3.0);
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(out.at(1, 0, 0) == doctest::Approx(1.0));
    CHECK(out.at(2, 0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("half-turn rotation equals double flip") {
    Image out = rotate(img, 180.0);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
          CHECK(out.at(c, y, x) ==
                doctest::Approx(img.at(c, img.height - 1 - y,
                                       img.width - 1 - x)).epsilon(1e-5));
  }
}

TEST_CASE("flip frequency near the configured probability") {
  Image img(1, 1, 2);
  img.at(0, 0, 0) = 0.0f;
  img.at(0, 0, 1) = 1.0f;
  Rng rng(6);
  int flips = 0;
  for (int i = 0; i < 1000; ++i) {
    Image out = augment(img, flip_only(0.5), rng.substream(i));
    flips += out.at(0, 0, 0) == 1.0f;
  }
  CHECK(flips >= 450);
  CHECK(flips <= 550);
}

TEST_CASE("policy validation") {
  auto p = AugmentationPolicy::strong();
  p.brightness = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = AugmentationPolicy::strong();
  p.crop_scale_min = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = AugmentationPolicy::weak();
  p.rotation_max = 10.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = AugmentationPolicy::weak();
  p.hflip_prob = 1.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS_AS(augment(Image(), AugmentationPolicy::weak(), Rng(0)),
                  ValidationError);
}

TEST_CASE("view batches follow the pairing convention") {
  Rng rng(7);
  std::vector<Image> imgs;
  for (int i = 0; i < 3; ++i) imgs.push_back(random_image(rng, 3, 8, 8));
  std::vector<const Image*> ptrs;
  std::vector<Rng> rngs;
  for (int i = 0; i < 3; ++i) {
    ptrs.push_back(&imgs[i]);
    rngs.push_back(Rng(100 + i));
  }
  auto strong = AugmentationPolicy::strong();
  auto views = make_view_batch(ptrs, strong, rngs, 1);
  REQUIRE(views.size() == 6);
  for (int i = 0; i < 3; ++i) {
    auto [a, b] = make_view_pair(imgs[i], strong, rngs[i]);
    CHECK(views[2 * i] == a);
    CHECK(views[2 * i + 1] == b);
  }
  auto threaded = make_view_batch(ptrs, strong, rngs, 3);
  for (int i = 0; i < 6; ++i) CHECK(threaded[i] == views[i]);
}
