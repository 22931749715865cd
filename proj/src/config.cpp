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

#include "ssld/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ssld/error.hpp"

namespace ssld {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ValidationError("config key '" + key + "': expected " + expected +
                        ", got '" + value + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    bad_value(key, v, "a non-negative integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::string real_str(float v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string real_str(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

struct Binding {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

using Table = std::vector<std::pair<std::string, Binding>>;

Binding real(double* f, const std::string& key) {
  return {[f, key](const std::string& v) { *f = parse_real(key, v); },
          [f] { return real_str(*f); }};
}

Binding size(std::size_t* f, const std::string& key) {
  return {[f, key](const std::string& v) {
            *f = static_cast<std::size_t>(parse_u64(key, v));
          },
          [f] { return std::to_string(*f); }};
}

Binding u64(std::uint64_t* f, const std::string& key) {
  return {[f, key](const std::string& v) { *f = parse_u64(key, v); },
          [f] { return std::to_string(*f); }};
}

Binding flag(bool* f, const std::string& key) {
  return {[f, key](const std::string& v) { *f = parse_bool(key, v); },
          [f] { return std::string(*f ? "true" : "false"); }};
}

Binding text(std::string* f) {
  return {[f](const std::string& v) { *f = v; }, [f] { return *f; }};
}

Binding path(std::filesystem::path* f) {
  return {[f](const std::string& v) { *f = v; }, [f] { return f->string(); }};
}

void add_stage(Table& t, const std::string& p, StageConfig& s) {
  t.push_back({p + ".lr", real(&s.lr, p + ".lr")});
  t.push_back({p + ".weight_decay", real(&s.weight_decay, p + ".weight_decay")});
  t.push_back({p + ".momentum", real(&s.momentum, p + ".momentum")});
  t.push_back({p + ".batch_size", size(&s.batch_size, p + ".batch_size")});
  t.push_back({p + ".epochs", size(&s.epochs, p + ".epochs")});
  t.push_back({p + ".policy", text(&s.policy)});
}

void add_policy(Table& t, const std::string& p, AugmentationPolicy& a) {
  t.push_back({p + ".brightness", real(&a.brightness, p + ".brightness")});
  t.push_back({p + ".contrast", real(&a.contrast, p + ".contrast")});
  t.push_back({p + ".saturation", real(&a.saturation, p + ".saturation")});
  t.push_back({p + ".hue", real(&a.hue, p + ".hue")});
  t.push_back({p + ".crop_scale_min", real(&a.crop_scale_min, p + ".crop_scale_min")});
  t.push_back({p + ".rotation_max", real(&a.rotation_max, p + ".rotation_max")});
  t.push_back({p + ".hflip_prob", real(&a.hflip_prob, p + ".hflip_prob")});
}

Table bindings(ExperimentConfig& c) {
  Table t;
  t.push_back({"preset", text(&c.preset)});
  t.push_back({"seed", u64(&c.seed, "seed")});
  t.push_back({"dataset.root", path(&c.dataset_root)});
  t.push_back({"dataset.image_size", size(&c.image_size, "dataset.image_size")});
  auto& g = c.generator;
  t.push_back({"generator.n_train", size(&g.n_train, "generator.n_train")});
  t.push_back({"generator.n_test", size(&g.n_test, "generator.n_test")});
  t.push_back({"generator.image_size", size(&g.image_size, "generator.image_size")});
  t.push_back({"generator.seed", u64(&g.seed, "generator.seed")});
  t.push_back({"generator.grade_distribution",
               {[&g](const std::string& v) {
                  std::array<double, 5> d{};
                  std::stringstream ss(v);
                  std::string item;
                  std::size_t n = 0;
                  while (std::getline(ss, item, ',')) {
                    if (n == d.size()) bad_value("generator.grade_distribution", v, "5 numbers");
                    d[n++] = parse_real("generator.grade_distribution", trim(item));
                  }
                  if (n != d.size()) bad_value("generator.grade_distribution", v, "5 numbers");
                  g.grade_distribution = d;
                },
                [&g] {
                  std::string s;
                  for (std::size_t i = 0; i < g.grade_distribution.size(); ++i) {
                    if (i) s += ',';
                    s += real_str(g.grade_distribution[i]);
                  }
                  return s;
                }}});
  t.push_back({"split.fraction", real(&c.label_fraction, "split.fraction")});
  t.push_back({"split.seed",
               {[&c](const std::string& v) { c.split_seed = parse_u64("split.seed", v); },
                [&c] { return std::to_string(c.effective_split_seed()); }}});
  t.push_back({"model.teacher", text(&c.teacher)});
  t.push_back({"model.student", text(&c.student)});
  auto& m = c.models;
  t.push_back({"model.projection_hidden", size(&m.projection_hidden, "model.projection_hidden")});
  t.push_back({"model.projection_dim", size(&m.projection_dim, "model.projection_dim")});
  t.push_back({"model.norm_momentum",
               {[&m](const std::string& v) {
                  m.norm.momentum = static_cast<float>(parse_real("model.norm_momentum", v));
                },
                [&m] { return real_str(m.norm.momentum); }}});
  t.push_back({"model.norm_eps",
               {[&m](const std::string& v) {
                  m.norm.eps = static_cast<float>(parse_real("model.norm_eps", v));
                },
                [&m] { return real_str(m.norm.eps); }}});
  t.push_back({"loss.bce_eps", real(&m.bce_eps, "loss.bce_eps")});
  add_policy(t, "augment.strong", m.strong);
  add_policy(t, "augment.weak", m.weak);
  add_stage(t, "pretrain", c.pretrain);
  t.push_back({"loss.temperature", real(&c.pretrain.temperature, "loss.temperature")});
  add_stage(t, "finetune_teacher", c.finetune_teacher);
  t.push_back({"pseudo_label.threshold",
               real(&c.pseudo_label.threshold, "pseudo_label.threshold")});
  add_stage(t, "distill", c.distill);
  add_stage(t, "finetune_student", c.finetune_student);
  t.push_back({"run.dir", path(&c.run_dir)});
  t.push_back({"run.workers",
               {[&m](const std::string& v) {
                  m.workers = static_cast<unsigned>(parse_u64("run.workers", v));
                },
                [&m] { return std::to_string(m.workers); }}});
  t.push_back({"run.deterministic", flag(&c.deterministic, "run.deterministic")});
  t.push_back({"run.full_baseline", flag(&c.full_baseline, "run.full_baseline")});
  for (auto& [name, spec] : m.custom_specs) {
    const std::string p = "encoder." + name;
    t.push_back({p + ".stages",
                 {[&spec](const std::string& v) { spec.stages = parse_stages(v); },
                  [&spec] { return format_stages(spec.stages); }}});
    t.push_back({p + ".feature_dim", size(&spec.feature_dim, p + ".feature_dim")});
  }
  return t;
}

StageConfig stage_defaults(Stage s, double lr, std::size_t batch,
                           std::size_t epochs, const std::string& policy) {
  StageConfig c;
  c.stage = s;
  c.lr = lr;
  c.weight_decay = 5e-4;
  c.momentum = 0.9;
  c.batch_size = batch;
  c.epochs = epochs;
  c.policy = policy;
  return c;
}

}  // namespace

ConfigEntries parse_config_text(const std::string& text,
                                const std::string& source) {
  ConfigEntries out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(source + ":" + std::to_string(lineno) +
                            ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": empty key");
    }
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

ExperimentConfig ExperimentConfig::preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "desk") {
    c.pretrain = stage_defaults(Stage::Pretrain, 0.1, 32, 30, "strong");
    c.finetune_teacher = stage_defaults(Stage::FinetuneTeacher, 0.01, 16, 5, "weak");
    c.distill = stage_defaults(Stage::Distill, 0.05, 32, 40, "weak");
    c.finetune_student = stage_defaults(Stage::FinetuneStudent, 0.01, 16, 20, "weak");
  } else if (name == "paper") {
    c.image_size = 299;
    c.generator.image_size = 299;
    c.label_fraction = 0.02;
    c.pretrain = stage_defaults(Stage::Pretrain, 1e-5, 64, 100, "strong");
    c.finetune_teacher = stage_defaults(Stage::FinetuneTeacher, 1e-4, 32, 100, "weak");
    c.distill = stage_defaults(Stage::Distill, 1e-4, 32, 200, "weak");
    c.finetune_student = stage_defaults(Stage::FinetuneStudent, 1e-4, 32, 100, "weak");
  } else {
    throw ValidationError("unknown preset '" + name + "' (expected desk or paper)");
  }
  c.pseudo_label = stage_defaults(Stage::PseudoLabel, 0.1, 32, 1, "weak");
  c.pseudo_label.threshold = 0.5;
  return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  // encoder.<name>.<field> declares a custom spec on first use.
  if (key.rfind("encoder.", 0) == 0) {
    const auto dot = key.rfind('.');
    const std::string name = key.substr(8, dot - 8);
    const std::string field = key.substr(dot + 1);
    if (dot <= 8 || name.empty() || (field != "stages" && field != "feature_dim")) {
      throw ValidationError("unknown config key '" + key + "'");
    }
    if (!models.custom_specs.count(name)) {
      EncoderSpec spec;
      if (name == "tiny-t" || name == "tiny-s") spec = resolve_spec(name);
      spec.name = name;
      models.custom_specs.emplace(name, spec);
    }
  }
  if (key == "preset") {
    if (value != preset) {
      throw ValidationError("preset must be chosen before other keys are applied");
    }
    return;
  }
  for (auto& [k, b] : bindings(*this)) {
    if (k == key) {
      b.set(value);
      return;
    }
  }
  throw ValidationError("unknown config key '" + key + "'");
}

StageConfig ExperimentConfig::stage(Stage s) const {
  StageConfig c;
  switch (s) {
    case Stage::Pretrain: c = pretrain; break;
    case Stage::FinetuneTeacher: c = finetune_teacher; break;
    case Stage::PseudoLabel: c = pseudo_label; break;
    case Stage::Distill: c = distill; break;
    case Stage::FinetuneStudent: c = finetune_student; break;
    case Stage::Supervised:
      c = finetune_teacher;
      c.stage = Stage::Supervised;
      break;
  }
  c.seed = seed;
  return c;
}

void ExperimentConfig::validate() const {
  if (image_size < 8) throw ValidationError("dataset.image_size must be at least 8");
  if (!(label_fraction > 0 && label_fraction <= 1)) {
    throw ValidationError("split.fraction must be in (0, 1]");
  }
  generator.validate();
  resolve_spec(teacher, models.custom_specs).validate();
  resolve_spec(student, models.custom_specs).validate();
  for (const auto& [name, spec] : models.custom_specs) {
    try {
      spec.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (config keys encoder." +
                            name + ".*)");
    }
  }
  if (models.projection_hidden == 0 || models.projection_dim == 0) {
    throw ValidationError("model.projection_hidden and model.projection_dim must be positive");
  }
  if (!(models.norm.momentum >= 0 && models.norm.momentum < 1)) {
    throw ValidationError("model.norm_momentum must be in [0, 1)");
  }
  if (!(models.norm.eps > 0)) throw ValidationError("model.norm_eps must be > 0");
  if (!(models.bce_eps > 0 && models.bce_eps < 0.5)) {
    throw ValidationError("loss.bce_eps must be in (0, 0.5)");
  }
  if (models.strong.kind != AugmentationPolicy::Kind::Strong ||
      models.weak.kind != AugmentationPolicy::Kind::Weak) {
    throw ValidationError("augmentation policy kinds are fixed");
  }
  models.strong.validate();
  models.weak.validate();
  for (const auto* s : {&pretrain, &finetune_teacher, &pseudo_label, &distill,
                        &finetune_student}) {
    s->validate();
  }
  if (models.workers == 0) throw ValidationError("run.workers must be >= 1");
  if (dataset_root.empty()) {
    throw ValidationError("missing required config key 'dataset.root'");
  }
}

ConfigEntries ExperimentConfig::entries() const {
  auto& self = const_cast<ExperimentConfig&>(*this);
  ConfigEntries out;
  for (auto& [k, b] : bindings(self)) out.emplace_back(k, b.get());
  return out;
}

std::vector<std::string> config_keys(const ExperimentConfig& cfg) {
  std::vector<std::string> keys;
  for (const auto& [k, v] : cfg.entries()) keys.push_back(k);
  return keys;
}

ExperimentConfig resolve_config(const ConfigEntries& file,
                                const ConfigEntries& flags,
                                const char* env_seed) {
  std::string preset = "desk";
  for (const auto* layer : {&file, &flags})
    for (const auto& [k, v] : *layer)
      if (k == "preset") preset = v;
  ExperimentConfig cfg = ExperimentConfig::preset_config(preset);
  if (env_seed && *env_seed) {
    try {
      cfg.seed = parse_u64("seed", env_seed);
    } catch (const ValidationError&) {
      throw ValidationError(std::string("SSL_DISTILL_SEED must be a non-negative integer, got '") +
                            env_seed + "'");
    }
  }
  for (const auto* layer : {&file, &flags})
    for (const auto& [k, v] : *layer)
      if (k != "preset") cfg.set(k, v);
  return cfg;
}

std::string to_text(const ConfigEntries& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

}  // namespace ssld
