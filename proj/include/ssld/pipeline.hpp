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
#include <string>
#include <vector>

#include "ssld/augment.hpp"
#include "ssld/checkpoint.hpp"
#include "ssld/data.hpp"
#include "ssld/losses.hpp"
#include "ssld/models.hpp"

namespace ssld {

struct StageConfig {
  Stage stage = Stage::Pretrain;
  double lr = 0.1;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::string policy = "strong";
  double temperature = 0.5;  // pretrain only
  double threshold = 0.5;    // pseudo_label only
  std::uint64_t seed = 0;

  void validate() const;
};

/// Everything a stage needs besides its own StageConfig.
struct PipelineContext {
  const Dataset* data = nullptr;
  std::map<std::string, EncoderSpec> custom_specs;
  std::size_t projection_hidden = 128;
  std::size_t projection_dim = 64;
  NormOptions norm;
  double bce_eps = kDefaultBceEps;
  AugmentationPolicy strong = AugmentationPolicy::strong();
  AugmentationPolicy weak = AugmentationPolicy::weak();
  unsigned workers = 1;

  const Dataset& dataset() const;
  EncoderSpec spec(const std::string& name) const;
  const AugmentationPolicy& policy(const std::string& name) const;
};

struct StageResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_losses;  // mean loss per epoch
};

struct PseudoLabel {
  std::string id;
  float soft = 0;
  int hard = 0;
};

struct PseudoLabelSet {
  double threshold = 0.5;
  std::vector<PseudoLabel> records;

  // Throws unless every record obeys hard == [soft >= threshold].
  void validate() const;
};

inline int hard_label(float soft, double threshold) {
  return soft >= threshold ? 1 : 0;
}

inline constexpr const char* kPseudoLabelHeader = "id,soft,hard";

void write_pseudo_labels(const std::filesystem::path& path,
                         const PseudoLabelSet& set);
PseudoLabelSet read_pseudo_labels(const std::filesystem::path& path,
                                  double threshold = 0.5);

/// Encoder plus binary head, rebuilt from or packed into checkpoints.
struct Classifier {
  Encoder encoder;
  ClassifierHead head;

  StateDict state() const;
  ParameterSet parameters() const;
};

/// Contrastive pretraining of `spec_name` on unlabeled ids.
StageResult pretrain(const PipelineContext& ctx,
                     const std::vector<std::string>& unlabeled,
                     const std::string& spec_name, const StageConfig& cfg);

/// Drops the projection head, attaches a fresh classifier and trains all
/// weights on the labeled ids.
StageResult finetune(const PipelineContext& ctx, const Checkpoint& pretrained,
                     const std::string& spec_name,
                     const std::vector<std::string>& labeled,
                     const StageConfig& cfg);

PseudoLabelSet generate_pseudo_labels(const PipelineContext& ctx,
                                      const Checkpoint& teacher,
                                      const std::vector<std::string>& unlabeled,
                                      double threshold);

/// Trains a freshly initialised student on hard pseudo-labels. The teacher
/// checkpoint supplies provenance and the labeled-set hash.
StageResult distill(const PipelineContext& ctx, const std::string& spec_name,
                    const Checkpoint& teacher, const PseudoLabelSet& labels,
                    const StageConfig& cfg);

StageResult finetune_student(const PipelineContext& ctx,
                             const Checkpoint& student,
                             const std::vector<std::string>& labeled,
                             const StageConfig& cfg);

/// Baseline: classifier from scratch on labels only.
StageResult train_supervised(const PipelineContext& ctx,
                             const std::string& spec_name,
                             const std::vector<std::string>& labeled,
                             const StageConfig& cfg);

Classifier load_classifier(const PipelineContext& ctx, const Checkpoint& ckpt);

/// Eval-mode probabilities, no augmentation.
std::vector<float> predict(const PipelineContext& ctx, const Checkpoint& ckpt,
                           const std::vector<std::string>& ids);

}  // namespace ssld
