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

#include "ssld/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>

#include "ssld/error.hpp"
#include "ssld/log.hpp"
#include "ssld/ops.hpp"
#include "ssld/optim.hpp"
#include "ssld/parallel.hpp"

namespace ssld {

namespace {

const std::vector<Stage> kTeacherChain = {Stage::Pretrain,
                                          Stage::FinetuneTeacher};
const std::vector<Stage> kDistilledChain = {
    Stage::Pretrain, Stage::FinetuneTeacher, Stage::PseudoLabel,
    Stage::Distill};

Rng stage_rng(const StageConfig& cfg) {
  return Rng(cfg.seed).substream(
      {stream::kStage, static_cast<std::uint64_t>(cfg.stage)});
}

StateDict snapshot(const StateDict& state) {
  StateDict out;
  out.reserve(state.size());
  for (const auto& [name, t] : state) out.emplace_back(name, t.clone());
  return out;
}

void require_stage(const StageConfig& cfg, Stage expected) {
  cfg.validate();
  if (cfg.stage != expected) {
    throw ValidationError("stage config for " + to_string(cfg.stage) +
                          " passed to " + to_string(expected));
  }
}

void require_ids(const Dataset& data, const std::vector<std::string>& ids,
                 const std::string& what) {
  if (ids.empty()) throw ValidationError(what + " set is empty");
  for (const auto& id : ids) data.at(id);
}

using BatchLoss =
    std::function<Tensor(std::span<const std::size_t> positions, std::size_t epoch)>;

// Shuffled mini-batch SGD over positions [0, n). Batches smaller than
// `min_batch` (only ever the trailing one) are skipped.
std::vector<double> run_epochs(const std::string& stage, std::size_t n,
                               const StageConfig& cfg, ParameterSet& params,
                               const Rng& rng, std::size_t min_batch,
                               const BatchLoss& batch_loss) {
  SgdOptions opts{static_cast<float>(cfg.lr),
                  static_cast<float>(cfg.weight_decay),
                  static_cast<float>(cfg.momentum)};
  std::vector<double> losses;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = rng.substream({stream::kShuffle, epoch});
    shuffle.shuffle(order);
    double total = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      if (end - start < min_batch) continue;
      std::span<const std::size_t> batch(order.data() + start, end - start);
      params.zero_grad();
      Tensor loss = batch_loss(batch, epoch);
      backward(loss);
      sgd_step(params, opts);
      total += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
      seen += batch.size();
    }
    const double mean = seen ? total / static_cast<double>(seen) : 0.0;
    if (!std::isfinite(mean)) {
      throw RuntimeError(stage + ": loss diverged at epoch " +
                         std::to_string(epoch + 1));
    }
    log().info("{} epoch {}/{} loss {:.6f}", stage, epoch + 1, cfg.epochs, mean);
    losses.push_back(mean);
  }
  return losses;
}

// Weakly augmented images for a classification batch.
Tensor classification_batch(const PipelineContext& ctx,
                            const std::vector<std::string>& ids,
                            std::span<const std::size_t> positions,
                            const AugmentationPolicy& policy, const Rng& rng,
                            std::size_t epoch) {
  const Dataset& data = ctx.dataset();
  std::vector<Image> images(positions.size());
  parallel_for(positions.size(), ctx.workers, [&](std::size_t i) {
    const std::size_t pos = positions[i];
    images[i] = augment(data.at(ids[pos]).pixels, policy,
                        rng.substream({stream::kAugment, epoch, pos}));
  });
  return stack_images(images);
}

Classifier make_classifier(const PipelineContext& ctx, const EncoderSpec& spec,
                           const Rng& rng) {
  return Classifier{Encoder(spec, rng.substream({stream::kInit, 0}), ctx.norm),
                    ClassifierHead(spec.feature_dim,
                                   rng.substream({stream::kInit, 1}))};
}

// Supervised BCE training shared by every classifier stage.
std::vector<double> train_classifier(const PipelineContext& ctx,
                                     Classifier& model,
                                     const std::vector<std::string>& ids,
                                     const std::vector<float>& targets,
                                     const StageConfig& cfg,
                                     const std::string& stage) {
  const auto& policy = ctx.policy(cfg.policy);
  const Rng rng = stage_rng(cfg);
  ParameterSet params = model.parameters();
  return run_epochs(
      stage, ids.size(), cfg, params, rng, 1,
      [&](std::span<const std::size_t> batch, std::size_t epoch) {
        Tensor x = classification_batch(ctx, ids, batch, policy, rng, epoch);
        std::vector<float> y;
        y.reserve(batch.size());
        for (auto pos : batch) y.push_back(targets[pos]);
        Tensor probs = forward_classify(model.encoder, model.head, x, true);
        return bce(probs, Tensor::from({batch.size()}, std::move(y)),
                   ctx.bce_eps);
      });
}

std::vector<float> true_labels(const Dataset& data,
                               const std::vector<std::string>& ids) {
  std::vector<float> y;
  y.reserve(ids.size());
  for (const auto& id : ids)
    y.push_back(static_cast<float>(data.at(id).binary_label));
  return y;
}

Checkpoint pack(const Classifier& model, const std::string& spec_name,
                const Sha256& split_hash, std::vector<Stage> provenance,
                std::uint64_t seed) {
  Checkpoint c;
  c.spec_name = spec_name;
  c.split_hash = split_hash;
  c.provenance = std::move(provenance);
  c.seed = seed;
  c.tensors = snapshot(model.state());
  return c;
}

void require_spec(const Checkpoint& ckpt, const std::string& spec_name,
                  const std::string& consumer) {
  if (ckpt.spec_name != spec_name) {
    throw ValidationError(consumer + ": spec mismatch, checkpoint holds '" +
                          ckpt.spec_name + "' but '" + spec_name +
                          "' was requested");
  }
}

}  // namespace

void StageConfig::validate() const {
  const std::string where = to_string(stage);
  if (!(lr > 0) || !std::isfinite(lr))
    throw ValidationError(where + ".lr must be > 0");
  if (weight_decay < 0) throw ValidationError(where + ".weight_decay must be >= 0");
  if (momentum < 0 || momentum >= 1)
    throw ValidationError(where + ".momentum must be in [0, 1)");
  if (batch_size < 2) throw ValidationError(where + ".batch_size must be >= 2");
  if (epochs < 1) throw ValidationError(where + ".epochs must be >= 1");
  if (policy != "strong" && policy != "weak")
    throw ValidationError(where + ".policy must be strong or weak");
  if (!(temperature > 0)) throw ValidationError(where + ".temperature must be > 0");
  if (!(threshold > 0 && threshold < 1))
    throw ValidationError(where + ".threshold must be in (0, 1)");
}

const Dataset& PipelineContext::dataset() const {
  if (!data) throw ValidationError("pipeline context has no dataset");
  return *data;
}

EncoderSpec PipelineContext::spec(const std::string& name) const {
  return resolve_spec(name, custom_specs);
}

const AugmentationPolicy& PipelineContext::policy(const std::string& name) const {
  if (name == "strong") return strong;
  if (name == "weak") return weak;
  throw ValidationError("unknown augmentation policy '" + name + "'");
}

void PseudoLabelSet::validate() const {
  for (const auto& r : records) {
    if (!(r.soft >= 0.0f && r.soft <= 1.0f)) {
      throw ValidationError("pseudo-label for " + r.id + " has soft value outside [0, 1]");
    }
    if (r.hard != hard_label(r.soft, threshold)) {
      throw ValidationError("pseudo-label for " + r.id +
                            " disagrees with threshold rule");
    }
  }
}

void write_pseudo_labels(const std::filesystem::path& path,
                         const PseudoLabelSet& set) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << kPseudoLabelHeader << '\n';
  char buf[32];
  for (const auto& r : set.records) {
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(r.soft));
    out << r.id << ',' << buf << ',' << r.hard << '\n';
  }
  if (!out) throw RuntimeError("error writing " + path.string());
}

PseudoLabelSet read_pseudo_labels(const std::filesystem::path& path,
                                  double threshold) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pseudo-label file " + path.string());
  PseudoLabelSet set;
  set.threshold = threshold;
  std::string line;
  if (!std::getline(in, line) || line != kPseudoLabelHeader) {
    throw FormatError("pseudo-label file must start with '" +
                      std::string(kPseudoLabelHeader) + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto bad = [&] {
      return FormatError("malformed pseudo-label row, line " + std::to_string(lineno));
    };
    auto c1 = line.find(',');
    auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw bad();
    PseudoLabel r;
    r.id = line.substr(0, c1);
    const char* sb = line.data() + c1 + 1;
    const char* se = line.data() + c2;
    auto [p1, e1] = std::from_chars(sb, se, r.soft);
    if (e1 != std::errc() || p1 != se) throw bad();
    const char* hb = line.data() + c2 + 1;
    const char* he = line.data() + line.size();
    auto [p2, e2] = std::from_chars(hb, he, r.hard);
    if (e2 != std::errc() || p2 != he || (r.hard != 0 && r.hard != 1)) throw bad();
    set.records.push_back(std::move(r));
  }
  set.validate();
  return set;
}

StateDict Classifier::state() const {
  StateDict s = encoder.state();
  auto h = head.state();
  s.insert(s.end(), h.begin(), h.end());
  return s;
}

ParameterSet Classifier::parameters() const {
  ParameterSet p = encoder.parameters();
  p.extend(head.parameters());
  return p;
}

StageResult pretrain(const PipelineContext& ctx,
                     const std::vector<std::string>& unlabeled,
                     const std::string& spec_name, const StageConfig& cfg) {
  require_stage(cfg, Stage::Pretrain);
  const Dataset& data = ctx.dataset();
  if (unlabeled.size() < cfg.batch_size) {
    throw ValidationError("pretrain: dataset too small, " +
                          std::to_string(unlabeled.size()) +
                          " images for batch size " +
                          std::to_string(cfg.batch_size));
  }
  require_ids(data, unlabeled, "pretrain");
  const EncoderSpec spec = ctx.spec(spec_name);
  const auto& policy = ctx.policy(cfg.policy);
  const Rng rng = stage_rng(cfg);
  Encoder encoder(spec, rng.substream({stream::kInit, 0}), ctx.norm);
  ProjectionHead head(spec.feature_dim, ctx.projection_hidden,
                      ctx.projection_dim, rng.substream({stream::kInit, 1}),
                      ctx.norm);
  ParameterSet params = encoder.parameters();
  params.extend(head.parameters());
  const NtXentConfig loss_cfg{cfg.temperature};

  log().info("pretrain: {} on {} images, {} params", spec.name, unlabeled.size(),
             encoder.parameter_count());
  StageResult result;
  result.epoch_losses = run_epochs(
      "pretrain", unlabeled.size(), cfg, params, rng, 2,
      [&](std::span<const std::size_t> batch, std::size_t epoch) {
        std::vector<const Image*> images;
        std::vector<Rng> rngs;
        for (auto pos : batch) {
          images.push_back(&data.at(unlabeled[pos]).pixels);
          rngs.push_back(rng.substream({stream::kAugment, epoch, pos}));
        }
        auto views = make_view_batch(images, policy, rngs, ctx.workers);
        auto z = forward_pretrain(encoder, head, stack_images(views), true);
        return nt_xent(z, loss_cfg);
      });

  Checkpoint& c = result.checkpoint;
  c.spec_name = spec.name;
  c.provenance = {Stage::Pretrain};
  c.seed = cfg.seed;
  c.tensors = snapshot(encoder.state());
  auto h = snapshot(head.state());
  c.tensors.insert(c.tensors.end(), h.begin(), h.end());
  return result;
}

StageResult finetune(const PipelineContext& ctx, const Checkpoint& pretrained,
                     const std::string& spec_name,
                     const std::vector<std::string>& labeled,
                     const StageConfig& cfg) {
  require_stage(cfg, Stage::FinetuneTeacher);
  require_provenance(pretrained, {Stage::Pretrain}, "finetune");
  require_spec(pretrained, spec_name, "finetune");
  const Dataset& data = ctx.dataset();
  require_ids(data, labeled, "finetune: labeled");
  const EncoderSpec spec = ctx.spec(spec_name);
  Classifier model = make_classifier(ctx, spec, stage_rng(cfg));
  // Projection head tensors in the checkpoint are simply not read.
  load_state(model.encoder.state(), pretrained.tensors);

  log().info("finetune: {} on {} labeled images", spec.name, labeled.size());
  StageResult result;
  result.epoch_losses = train_classifier(ctx, model, labeled,
                                         true_labels(data, labeled), cfg,
                                         "finetune");
  result.checkpoint = pack(model, spec.name, hash_ids(labeled), kTeacherChain,
                           cfg.seed);
  return result;
}

PseudoLabelSet generate_pseudo_labels(const PipelineContext& ctx,
                                      const Checkpoint& teacher,
                                      const std::vector<std::string>& unlabeled,
                                      double threshold) {
  if (!(threshold > 0 && threshold < 1)) {
    throw ValidationError("pseudo_label.threshold must be in (0, 1)");
  }
  require_provenance(teacher, kTeacherChain, "pseudo-label");
  if (unlabeled.empty()) throw ValidationError("pseudo-label: unlabeled set is empty");
  auto soft = predict(ctx, teacher, unlabeled);
  PseudoLabelSet set;
  set.threshold = threshold;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    const int hard = hard_label(soft[i], threshold);
    positives += static_cast<std::size_t>(hard);
    set.records.push_back({unlabeled[i], soft[i], hard});
  }
  log().info("pseudo-label: {} records, {} positive", set.records.size(), positives);
  return set;
}

StageResult distill(const PipelineContext& ctx, const std::string& spec_name,
                    const Checkpoint& teacher, const PseudoLabelSet& labels,
                    const StageConfig& cfg) {
  require_stage(cfg, Stage::Distill);
  require_provenance(teacher, kTeacherChain, "distill");
  if (labels.records.empty()) throw ValidationError("distill: pseudo-label set is empty");
  labels.validate();
  const Dataset& data = ctx.dataset();

  std::vector<std::string> ids;
  std::vector<float> targets;
  std::size_t positives = 0;
  for (const auto& r : labels.records) {
    data.at(r.id);
    ids.push_back(r.id);
    targets.push_back(static_cast<float>(r.hard));
    positives += static_cast<std::size_t>(r.hard);
  }
  if (positives == 0 || positives == ids.size()) {
    log().warn("distill: all {} pseudo-labels are {}, student will collapse to one class",
               ids.size(), positives ? 1 : 0);
  }

  const EncoderSpec spec = ctx.spec(spec_name);
  Classifier model = make_classifier(ctx, spec, stage_rng(cfg));
  const std::size_t student_params = model.parameters().count_values();
  const std::size_t teacher_params =
      Encoder(ctx.spec(teacher.spec_name), Rng(0), ctx.norm).parameter_count() +
      spec.feature_dim + 1;
  if (student_params < teacher_params) {
    log().warn("distill: student '{}' has {} parameters, fewer than teacher '{}' ({})",
               spec.name, student_params, teacher.spec_name, teacher_params);
  }

  log().info("distill: {} on {} pseudo-labeled images", spec.name, ids.size());
  StageResult result;
  result.epoch_losses = train_classifier(ctx, model, ids, targets, cfg, "distill");
  result.checkpoint = pack(model, spec.name, teacher.split_hash, kDistilledChain,
                           cfg.seed);
  return result;
}

StageResult finetune_student(const PipelineContext& ctx,
                             const Checkpoint& student,
                             const std::vector<std::string>& labeled,
                             const StageConfig& cfg) {
  require_stage(cfg, Stage::FinetuneStudent);
  require_provenance(student, kDistilledChain, "finetune-student");
  const Dataset& data = ctx.dataset();
  require_ids(data, labeled, "finetune-student: labeled");
  if (hash_ids(labeled) != student.split_hash) {
    throw ValidationError(
        "finetune-student: labeled set mismatch, split hash " +
        to_hex(hash_ids(labeled)) + " differs from the teacher's " +
        to_hex(student.split_hash));
  }
  Classifier model = load_classifier(ctx, student);

  log().info("finetune-student: {} on {} labeled images", student.spec_name,
             labeled.size());
  StageResult result;
  result.epoch_losses = train_classifier(ctx, model, labeled,
                                         true_labels(data, labeled), cfg,
                                         "finetune-student");
  auto chain = kDistilledChain;
  chain.push_back(Stage::FinetuneStudent);
  result.checkpoint = pack(model, student.spec_name, student.split_hash,
                           std::move(chain), cfg.seed);
  return result;
}

StageResult train_supervised(const PipelineContext& ctx,
                             const std::string& spec_name,
                             const std::vector<std::string>& labeled,
                             const StageConfig& cfg) {
  cfg.validate();
  const Dataset& data = ctx.dataset();
  require_ids(data, labeled, "supervised: labeled");
  StageConfig c = cfg;
  c.stage = Stage::Supervised;
  const EncoderSpec spec = ctx.spec(spec_name);
  Classifier model = make_classifier(ctx, spec, stage_rng(c));
  log().info("supervised: {} on {} labeled images", spec.name, labeled.size());
  StageResult result;
  result.epoch_losses = train_classifier(ctx, model, labeled,
                                         true_labels(data, labeled), c,
                                         "supervised");
  result.checkpoint = pack(model, spec.name, hash_ids(labeled),
                           {Stage::Supervised}, cfg.seed);
  return result;
}

Classifier load_classifier(const PipelineContext& ctx, const Checkpoint& ckpt) {
  const Stage last = ckpt.last_stage();
  if (last == Stage::Pretrain || last == Stage::PseudoLabel) {
    throw ValidationError("checkpoint from stage " + to_string(last) +
                          " has no classifier head");
  }
  const EncoderSpec spec = ctx.spec(ckpt.spec_name);
  Classifier model = make_classifier(ctx, spec, Rng(ckpt.seed));
  load_state(model.state(), ckpt.tensors);
  return model;
}

std::vector<float> predict(const PipelineContext& ctx, const Checkpoint& ckpt,
                           const std::vector<std::string>& ids) {
  constexpr std::size_t kEvalBatch = 200;
  const Dataset& data = ctx.dataset();
  Classifier model = load_classifier(ctx, ckpt);
  NoGradGuard no_grad;
  std::vector<float> out;
  out.reserve(ids.size());
  for (std::size_t start = 0; start < ids.size(); start += kEvalBatch) {
    const std::size_t end = std::min(ids.size(), start + kEvalBatch);
    std::vector<Image> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(data.at(ids[i]).pixels);
    Tensor p = forward_classify(model.encoder, model.head, stack_images(images), false);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return out;
}

}  // namespace ssld
