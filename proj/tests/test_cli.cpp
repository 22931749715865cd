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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"

using namespace ssld;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ssl-distill");
  std::ostringstream out, err;
  int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ssld_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  auto none = run({});
  CHECK(none.code == 1);
  auto bogus = run({"bogus"});
  CHECK(bogus.code == 1);
  CHECK(bogus.err.find("Usage") != std::string::npos);
  auto flag = run({"split", "--data", "x", "--no-such-flag", "1"});
  CHECK(flag.code == 1);
  CHECK(flag.err.find("unknown config key 'no-such-flag'") != std::string::npos);
  CHECK(flag.err.find("Usage") != std::string::npos);
  CHECK(run({"split", "--data", "x", "stray"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("threshold out of range is a validation error") {
  auto r = run({"pseudo-label", "--threshold", "1.5"});
  CHECK(r.code == 1);
  CHECK(r.err.find("threshold") != std::string::npos);
}

TEST_CASE("missing dataset is a validation error") {
  CHECK(run({"run-all", "--data", "/nonexistent/ssld"}).code == 1);
  CHECK(run({"run-all"}).code == 1);
}

TEST_CASE("gen-data and split with flag precedence") {
  auto dir = scratch("gen");
  auto gen = run({"gen-data", "--out", (dir / "data").string(), "--generator.n_train",
                  "20", "--generator.n_test=10"});
  REQUIRE(gen.code == 0);
  CHECK(fs::exists(dir / "data" / "manifest.csv"));

  std::ofstream(dir / "c.cfg") << "dataset.root = " << (dir / "data").string()
                               << "\nsplit.fraction = 0.5\n";
  auto from_file = run({"split", "--config", (dir / "c.cfg").string(), "--out",
                        (dir / "s1.csv").string()});
  REQUIRE(from_file.code == 0);
  CHECK(from_file.out.find("labeled 10,") != std::string::npos);

  auto from_flag = run({"split", "--config", (dir / "c.cfg").string(), "--fraction",
                        "0.25", "--out", (dir / "s2.csv").string()});
  REQUIRE(from_flag.code == 0);
  CHECK(from_flag.out.find("labeled 5,") != std::string::npos);

  auto dotted = run({"split", "--config", (dir / "c.cfg").string(), "--split.fraction",
                     "0.1", "--out", (dir / "s3.csv").string()});
  REQUIRE(dotted.code == 0);
  CHECK(dotted.out.find("labeled 2,") != std::string::npos);
}

TEST_CASE("stage commands chain through the run directory") {
  auto dir = scratch("stages");
  REQUIRE(run({"gen-data", "--out", (dir / "data").string(), "--generator.n_train", "48",
               "--generator.n_test", "16"}).code == 0);
  const std::vector<std::string> common = {
      "--data", (dir / "data").string(), "--run-dir", (dir / "run").string(),
      "--split.fraction", "0.25", "--pretrain.epochs", "1", "--pretrain.batch_size", "16",
      "--finetune_teacher.epochs", "1", "--distill.epochs", "1",
      "--finetune_student.epochs", "1", "--deterministic"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return run(a);
  };
  CHECK(with({"pretrain"}).code == 0);
  CHECK(with({"finetune"}).code == 0);
  CHECK(with({"pseudo-label"}).code == 0);
  CHECK(with({"distill"}).code == 0);
  CHECK(with({"finetune-student"}).code == 0);
  auto eval = with({"evaluate", "--checkpoint", (dir / "run" / "teacher.ckpt").string(),
                    "--checkpoint", (dir / "run" / "student.ckpt").string()});
  CHECK(eval.code == 0);
  CHECK(eval.out.find("teacher") != std::string::npos);
  CHECK(eval.out.find("student") != std::string::npos);

  // Out-of-order input: a pretrain checkpoint cannot be distilled from.
  auto wrong = with({"distill", "--teacher", (dir / "run" / "pretrain.ckpt").string()});
  CHECK(wrong.code == 1);
  // Corrupt checkpoint: format error, still a validation-class exit.
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK(with({"finetune", "--checkpoint", (dir / "junk.ckpt").string()}).code == 1);
}

TEST_CASE("grad-check passes") {
  auto r = run({"grad-check"});
  CHECK(r.code == 0);
  CHECK(r.out.find("gradient checks passed") != std::string::npos);
}
