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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ssld {

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
};

/// Mann-Whitney AUC, ties count one half. Labels must be 0/1 with both present.
double auc(std::span<const float> scores, std::span<const int> labels);

/// One point per distinct threshold, from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(std::span<const float> scores,
                                std::span<const int> labels);

double trapezoid_area(std::span<const RocPoint> curve);

double accuracy(std::span<const float> scores, std::span<const int> labels,
                double threshold = 0.5);

struct ModelResult {
  std::string name;
  double auc = 0;
  double accuracy = 0;
  std::size_t n_test = 0;
  std::vector<RocPoint> roc;
};

ModelResult evaluate_scores(const std::string& name,
                            std::span<const float> scores,
                            std::span<const int> labels);

struct EvalReport {
  std::vector<ModelResult> models;

  const ModelResult& at(const std::string& name) const;
};

inline constexpr const char* kReportHeader = "model,auc,accuracy,n_test";

void write_report_csv(std::ostream& out, const EvalReport& report);
void write_report_table(std::ostream& out, const EvalReport& report);
void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve);

/// Writes report.csv, report.txt and roc_<model>.csv into `dir`.
void save_report(const std::filesystem::path& dir, const EvalReport& report);

}  // namespace ssld
