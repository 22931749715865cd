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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ssld/data.hpp"
#include "ssld/error.hpp"
#include "ssld/metrics.hpp"
#include "ssld/rng.hpp"

using namespace ssld;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ssld_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GeneratorConfig small_config() {
  GeneratorConfig cfg;
  cfg.n_train = 40;
  cfg.n_test = 10;
  return cfg;
}

// Filled disc of the given radius and centre on a black frame.
Image disc(std::size_t size, double cx, double cy, double r) {
  Image img(3, size, size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r)
        for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = 0.6f;
    }
  return img;
}

std::pair<double, double> centroid(const Image& img) {
  double sx = 0, sy = 0, n = 0;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double m = img.at(0, y, x);
      sx += m * (x + 0.5);
      sy += m * (y + 0.5);
      n += m;
    }
  return {sx / n, sy / n};
}

std::vector<ManifestRecord> train_records(std::size_t n) {
  std::vector<ManifestRecord> r;
  for (std::size_t i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%05zu.ppm", i);
    r.push_back({name, 0, 0, Split::Train});
  }
  return r;
}

}  // namespace

TEST_CASE("referable means grade two or higher") {
  CHECK(binary_label_for_grade(0) == 0);
  CHECK(binary_label_for_grade(1) == 0);
  CHECK(binary_label_for_grade(2) == 1);
  CHECK(binary_label_for_grade(4) == 1);
  CHECK_THROWS_AS(binary_label_for_grade(5), ValidationError);
}

// Crude lesion detector: pixels far from their 5x5 neighbourhood mean.
static float spot_score(const Image& img) {
  float score = 0;
  for (std::size_t y = 2; y + 2 < img.height; ++y)
    for (std::size_t x = 2; x + 2 < img.width; ++x) {
      float dev = 0;
      for (std::size_t c = 0; c < img.channels; ++c) {
        float m = 0;
        for (std::size_t dy = 0; dy < 5; ++dy)
          for (std::size_t dx = 0; dx < 5; ++dx)
            m += img.at(c, y + dy - 2, x + dx - 2);
        dev += std::abs(img.at(c, y, x) - m / 25.0f);
      }
      if (dev > 0.25f) score += dev;
    }
  return score;
}

TEST_CASE("lesions are visible to a hand-made detector") {
  std::vector<float> scores;
  std::vector<int> labels;
  const Rng base(123);
  for (int i = 0; i < 400; ++i) {
    const int grade = i % 5;
    scores.push_back(spot_score(render_fundus(grade, 32, base.substream(i))));
    labels.push_back(binary_label_for_grade(grade));
  }
  const double a = auc(scores, labels);
  MESSAGE("spot detector auc " << a);
  CHECK(a > 0.8);
  CHECK(a < 1.0);
}

TEST_CASE("generation is a pure function of the config") {
  auto a = scratch("gen_a"), b = scratch("gen_b");
  auto ra = generate_synthetic(small_config(), a);
  auto rb = generate_synthetic(small_config(), b);
  CHECK(ra == rb);
  CHECK(slurp(a / "manifest.csv") == slurp(b / "manifest.csv"));
  for (const auto& r : ra) {
    CAPTURE(r.filename);
    CHECK(slurp(a / "images" / r.filename) == slurp(b / "images" / r.filename));
  }
  auto other = small_config();
  other.seed = 8;
  auto c = scratch("gen_c");
  generate_synthetic(other, c);
  CHECK(slurp(a / "images" / ra[0].filename) != slurp(c / "images" / ra[0].filename));
}

TEST_CASE("generated manifest is consistent") {
  auto root = scratch("gen_manifest");
  auto recs = generate_synthetic(small_config(), root);
  REQUIRE(recs.size() == 50);
  CHECK(std::count_if(recs.begin(), recs.end(),
                      [](auto& r) { return r.split == Split::Test; }) == 10);
  for (const auto& r : recs) CHECK(r.binary_label == binary_label_for_grade(r.grade));
  CHECK(read_manifest(root / "manifest.csv") == recs);
  CHECK(recs.front().id() == "img00000");
}

TEST_CASE("degenerate grade distribution yields one class") {
  auto cfg = small_config();
  cfg.grade_distribution = {1, 0, 0, 0, 0};
  auto recs = generate_synthetic(cfg, scratch("gen_degenerate"));
  for (const auto& r : recs) {
    CHECK(r.grade == 0);
    CHECK(r.binary_label == 0);
  }
}

TEST_CASE("generator config validation") {
  auto cfg = small_config();
  cfg.grade_distribution = {0.5, 0.5, 0.5, 0, 0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = small_config();
  cfg.n_test = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("PPM round trip at 8-bit precision") {
  Rng rng(3);
  Image img(3, 5, 7);
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform_index(256)) / 255.0f;
  auto dir = scratch("ppm");
  write_ppm(dir / "x.ppm", img);
  CHECK(read_ppm(dir / "x.ppm") == img);
  std::ofstream(dir / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), FormatError);
}

TEST_CASE("manifest round trip and errors") {
  auto dir = scratch("manifest");
  std::vector<ManifestRecord> recs = {{"img0.ppm", 0, 0, Split::Train},
                                      {"img1.ppm", 3, 1, Split::Test},
                                      {"img2.ppm", 2, 1, Split::Train}};
  write_manifest(dir / "m.csv", recs);
  const auto text = slurp(dir / "m.csv");
  CHECK(read_manifest(dir / "m.csv") == recs);
  write_manifest(dir / "m2.csv", read_manifest(dir / "m.csv"));
  CHECK(slurp(dir / "m2.csv") == text);

  std::ofstream(dir / "bad.csv") << text << "img3.ppm,5,1,train\n";
  try {
    read_manifest(dir / "bad.csv");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("grade out of range, line 5") != std::string::npos);
  }
  std::ofstream(dir / "mismatch.csv") << text << "img3.ppm,1,1,train\n";
  CHECK_THROWS_AS(read_manifest(dir / "mismatch.csv"), ValidationError);
  std::ofstream(dir / "header.csv") << "file,grade\n";
  CHECK_THROWS_AS(read_manifest(dir / "header.csv"), FormatError);
}

TEST_CASE("preprocess keeps a full-frame disc") {
  // Disc touching all four edges: crop is the whole frame.
  Image img = disc(32, 16, 16, 16.5);
  Image out = preprocess(img, 32);
  REQUIRE(out.pixels.size() == img.pixels.size());
  double m = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(out.pixels[i]) - img.pixels[i]));
  CHECK(m <= 1e-6);
}

TEST_CASE("preprocess centres an offset disc") {
  Image img = disc(48, 14.0, 30.0, 9.0);
  Image out = preprocess(img, 32);
  auto [cx, cy] = centroid(out);
  CHECK(std::abs(cx - 16.0) <= 1.0);
  CHECK(std::abs(cy - 16.0) <= 1.0);
}

TEST_CASE("preprocess rejects a blank image") {
  CHECK_THROWS_AS(preprocess(Image(3, 16, 16), 16), ValidationError);
}

TEST_CASE("split sizes") {
  auto recs = train_records(2000);
  auto s = make_split(recs, 0.05, 0);
  CHECK(s.labeled.size() == 100);
  CHECK(s.unlabeled.size() == 1900);
  auto all = make_split(recs, 1.0, 0);
  CHECK(all.labeled.size() == 2000);
  CHECK(all.unlabeled.empty());
  CHECK_THROWS_AS(make_split(recs, 0.0, 0), ValidationError);
  CHECK_THROWS_AS(make_split(recs, 1.5, 0), ValidationError);
  CHECK_THROWS_AS(make_split(train_records(10), 0.01, 0), ValidationError);
}

TEST_CASE("split is deterministic and seed dependent") {
  auto recs = train_records(500);
  auto a = make_split(recs, 0.1, 4), b = make_split(recs, 0.1, 4);
  CHECK(a.labeled == b.labeled);
  CHECK(hash_ids(a.labeled) == hash_ids(b.labeled));
  CHECK(make_split(recs, 0.1, 5).labeled != a.labeled);
}

TEST_CASE("split partitions the train ids") {
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + rng.uniform_index(300);
    const std::size_t n_test = rng.uniform_index(20);
    auto recs = train_records(n + n_test);
    for (std::size_t i = n; i < recs.size(); ++i) recs[i].split = Split::Test;
    const double frac = 0.01 + 0.99 * rng.uniform();
    const auto want = static_cast<std::size_t>(std::llround(frac * n));
    if (want == 0) {
      CHECK_THROWS_AS(make_split(recs, frac, k), ValidationError);
      continue;
    }
    auto s = make_split(recs, frac, static_cast<std::uint64_t>(k));
    CHECK(s.labeled.size() == want);
    CHECK(s.labeled.size() + s.unlabeled.size() == n);
    CHECK(s.test.size() == n_test);
    std::set<std::string> seen(s.labeled.begin(), s.labeled.end());
    for (const auto& id : s.unlabeled) CHECK(seen.insert(id).second);
    CHECK(seen.size() == n);
  }
}

TEST_CASE("split file round trip") {
  auto dir = scratch("split");
  auto s = make_split(train_records(50), 0.2, 1);
  write_split(dir / "s.csv", s);
  auto back = read_split(dir / "s.csv");
  CHECK(back.labeled == s.labeled);
  CHECK(back.unlabeled == s.unlabeled);
  CHECK(back.test == s.test);
}

TEST_CASE("id hash is order independent and matches SHA-256") {
  // sha256("a\nb\n")
  CHECK(to_hex(hash_ids({"b", "a"})) ==
        "911169ddaaf146aff539f58c26c489af3b892dff0fe283c1c264c65ae5aa59a2");
  CHECK(hash_ids({"a", "b"}) == hash_ids({"b", "a"}));
  CHECK(hash_ids({"a"}) != hash_ids({"a", "b"}));
}

TEST_CASE("dataset loading") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/ssld", 32, 1), ValidationError);
  auto root = scratch("load");
  auto recs = generate_synthetic(small_config(), root);
  auto ds = load_dataset(root, 24, 2);
  REQUIRE(ds.samples.size() == recs.size());
  CHECK(ds.records() == recs);
  const auto& s = ds.at("img00003");
  CHECK(s.pixels.height == 24);
  CHECK(s.pixels.width == 24);
  CHECK(s.grade == recs[3].grade);
  CHECK_THROWS_AS(ds.at("missing"), ValidationError);
  auto ds1 = load_dataset(root, 24, 1);
  CHECK(ds1.samples[7].pixels == ds.samples[7].pixels);
}
