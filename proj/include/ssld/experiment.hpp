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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ssld/config.hpp"
#include "ssld/metrics.hpp"

namespace ssld {

// Report row names, one per evaluated model.
inline constexpr const char* kSupervisedFull = "supervised-full";
inline constexpr const char* kSupervisedBaseline = "supervised-baseline";
inline constexpr const char* kTeacherRow = "simclr-finetuned-teacher";
inline constexpr const char* kStudentRow = "simclr-distilled-student";

struct RunSummary {
  EvalReport report;
  std::map<std::string, std::filesystem::path> checkpoints;  // by artifact name
  std::filesystem::path pseudo_labels;
  std::map<std::string, std::vector<double>> losses;  // per stage
  double seconds = 0;
};

/// All four stages plus baselines, artifacts written under cfg.run_dir.
RunSummary run_all(const ExperimentConfig& cfg);

/// Loads the dataset, failing early if the directory is missing.
Dataset open_dataset(const ExperimentConfig& cfg);

/// Reads `path` when it exists, otherwise derives the split from the config.
DatasetSplit split_for(const ExperimentConfig& cfg, const Dataset& data);

PipelineContext make_context(const ExperimentConfig& cfg, const Dataset& data);

}  // namespace ssld
