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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssld/data.hpp"
#include "ssld/pipeline.hpp"

namespace ssld {

/// Flat `section.key = value` settings. Later assignments win.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Parses the text format: one assignment per line, '#' starts a comment.
ConfigEntries parse_config_text(const std::string& text,
                                const std::string& source = "<config>");
ConfigEntries read_config_file(const std::filesystem::path& path);

struct ExperimentConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::filesystem::path dataset_root;  // required
  std::size_t image_size = 32;
  GeneratorConfig generator;
  double label_fraction = 0.05;
  std::optional<std::uint64_t> split_seed;  // defaults to `seed`
  std::string teacher = "tiny-t";
  std::string student = "tiny-s";
  PipelineContext models;  // dataset pointer unset
  StageConfig pretrain, finetune_teacher, pseudo_label, distill,
      finetune_student;
  std::filesystem::path run_dir = "runs/default";
  bool deterministic = false;
  bool full_baseline = true;

  static ExperimentConfig preset_config(const std::string& name);

  /// Sets one key; throws ValidationError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Throws ValidationError naming the first missing or invalid key.
  void validate() const;
  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }
  /// Stage configs carry the experiment seed.
  StageConfig stage(Stage s) const;
  /// Every key with its current value, in a form `set` accepts back.
  ConfigEntries entries() const;
};

std::vector<std::string> config_keys(const ExperimentConfig& cfg);

/// Layers settings by precedence: preset < SSL_DISTILL_SEED < file < flags.
/// A `preset` key in the flags or file picks the base preset.
ExperimentConfig resolve_config(const ConfigEntries& file,
                                const ConfigEntries& flags,
                                const char* env_seed);

std::string to_text(const ConfigEntries& entries);

}  // namespace ssld
