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

#include "ssld/experiment.hpp"

#include <chrono>
#include <fstream>

#include "ssld/error.hpp"
#include "ssld/log.hpp"

namespace ssld {

namespace {

// Re-throws with the stage name in front, keeping the error category.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const FormatError& e) {
    throw FormatError(stage + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(stage + ": " + e.what());
  } catch (const RuntimeError& e) {
    throw RuntimeError(stage + ": " + e.what());
  }
}

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> labels_of(const Dataset& data, const std::vector<std::string>& ids) {
  std::vector<int> y;
  for (const auto& id : ids) y.push_back(data.at(id).binary_label);
  return y;
}

}  // namespace

Dataset open_dataset(const ExperimentConfig& cfg) {
  return load_dataset(cfg.dataset_root, cfg.image_size,
                      cfg.deterministic ? 1u : cfg.models.workers);
}

DatasetSplit split_for(const ExperimentConfig& cfg, const Dataset& data) {
  return make_split(data.records(), cfg.label_fraction, cfg.effective_split_seed());
}

PipelineContext make_context(const ExperimentConfig& cfg, const Dataset& data) {
  PipelineContext ctx = cfg.models;
  ctx.data = &data;
  if (cfg.deterministic) ctx.workers = 1;
  return ctx;
}

RunSummary run_all(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  cfg.validate();
  const Dataset data = open_dataset(cfg);
  const DatasetSplit split = split_for(cfg, data);
  const PipelineContext ctx = make_context(cfg, data);
  const auto& dir = cfg.run_dir;
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.resolved");
    out << to_text(cfg.entries());
  }
  write_split(dir / "split.csv", split);
  log().info("run-all: {} labeled, {} unlabeled, {} test images", split.labeled.size(),
             split.unlabeled.size(), split.test.size());

  RunSummary summary;
  auto keep = [&](const std::string& name, const StageResult& r) {
    const auto path = dir / (name + ".ckpt");
    save_checkpoint(path, r.checkpoint);
    summary.checkpoints[name] = path;
    summary.losses[name] = r.epoch_losses;
    return r.checkpoint;
  };

  const Checkpoint pretrained = keep("pretrain", in_stage("pretrain", [&] {
    return pretrain(ctx, split.unlabeled, cfg.teacher, cfg.stage(Stage::Pretrain));
  }));
  const Checkpoint teacher = keep("teacher", in_stage("finetune_teacher", [&] {
    return finetune(ctx, pretrained, cfg.teacher, split.labeled,
                    cfg.stage(Stage::FinetuneTeacher));
  }));
  const PseudoLabelSet labels = in_stage("pseudo_label", [&] {
    return generate_pseudo_labels(ctx, teacher, split.unlabeled,
                                  cfg.pseudo_label.threshold);
  });
  summary.pseudo_labels = dir / "pseudo_labels.csv";
  write_pseudo_labels(summary.pseudo_labels, labels);
  const Checkpoint distilled = keep("student_distilled", in_stage("distill", [&] {
    return distill(ctx, cfg.student, teacher, labels, cfg.stage(Stage::Distill));
  }));
  const Checkpoint student = keep("student", in_stage("finetune_student", [&] {
    return finetune_student(ctx, distilled, split.labeled,
                            cfg.stage(Stage::FinetuneStudent));
  }));
  const Checkpoint baseline = keep("supervised_baseline", in_stage("supervised", [&] {
    return train_supervised(ctx, cfg.teacher, split.labeled,
                            cfg.stage(Stage::Supervised));
  }));

  std::vector<std::pair<std::string, const Checkpoint*>> rows;
  Checkpoint full;
  if (cfg.full_baseline) {
    std::vector<std::string> all = split.labeled;
    all.insert(all.end(), split.unlabeled.begin(), split.unlabeled.end());
    std::sort(all.begin(), all.end());
    full = keep("supervised_full", in_stage("supervised-full", [&] {
      return train_supervised(ctx, cfg.teacher, all, cfg.stage(Stage::Supervised));
    }));
    rows.emplace_back(kSupervisedFull, &full);
  }
  rows.emplace_back(kSupervisedBaseline, &baseline);
  rows.emplace_back(kTeacherRow, &teacher);
  rows.emplace_back(kStudentRow, &student);

  const auto y = labels_of(data, split.test);
  in_stage("evaluate", [&] {
    for (const auto& [name, ckpt] : rows) {
      auto scores = predict(ctx, *ckpt, split.test);
      summary.report.models.push_back(evaluate_scores(name, scores, y));
    }
  });
  save_report(dir, summary.report);
  summary.seconds = since(t0);
  log().info("run-all finished in {:.1f} s", summary.seconds);
  return summary;
}

}  // namespace ssld
