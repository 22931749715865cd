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

#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "ssld/error.hpp"
#include "ssld/experiment.hpp"
#include "ssld/gradsuite.hpp"
#include "ssld/log.hpp"

namespace ssld {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::string> preset, seed, data, run_dir, workers, threshold,
      fraction;
  bool deterministic = false;
  std::string out;
  std::string split;
  std::vector<std::string> checkpoints;
  std::string teacher;
  std::string labels;
};

void add_common(CLI::App* sub, Options& o) {
  sub->allow_extras();
  sub->add_option("--config", o.config, "Config file (section.key = value)");
  sub->add_option("--preset", o.preset, "Base preset: desk or paper");
  sub->add_option("--seed", o.seed, "Experiment seed");
  sub->add_option("--data", o.data, "Dataset root (dataset.root)");
  sub->add_option("--run-dir", o.run_dir, "Artifact directory (run.dir)");
  sub->add_option("--workers", o.workers, "Loader threads (run.workers)");
  sub->add_flag("--deterministic", o.deterministic, "Force single-worker execution");
}

// Leftover `--section.key value` or `--section.key=value` arguments.
ConfigEntries override_entries(const std::vector<std::string>& extra) {
  ConfigEntries out;
  for (std::size_t i = 0; i < extra.size(); ++i) {
    const std::string& tok = extra[i];
    if (tok.rfind("--", 0) != 0 || tok.size() == 2) {
      throw ValidationError("unexpected argument '" + tok + "'");
    }
    std::string key = tok.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extra.size()) throw ValidationError("flag '" + tok + "' needs a value");
      value = extra[++i];
    }
    out.emplace_back(key, value);
  }
  return out;
}

ExperimentConfig build_config(const Options& o, const std::vector<std::string>& extra) {
  ConfigEntries file;
  if (!o.config.empty()) file = read_config_file(o.config);
  ConfigEntries flags;
  auto put = [&](const char* key, const std::optional<std::string>& v) {
    if (v) flags.emplace_back(key, *v);
  };
  put("preset", o.preset);
  put("seed", o.seed);
  put("dataset.root", o.data);
  put("run.dir", o.run_dir);
  put("run.workers", o.workers);
  put("pseudo_label.threshold", o.threshold);
  put("split.fraction", o.fraction);
  if (o.deterministic) flags.emplace_back("run.deterministic", "true");
  auto dotted = override_entries(extra);
  flags.insert(flags.end(), dotted.begin(), dotted.end());
  return resolve_config(file, flags, std::getenv("SSL_DISTILL_SEED"));
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

DatasetSplit load_split(const Options& o, const ExperimentConfig& cfg,
                        const Dataset& data) {
  if (!o.split.empty()) return read_split(o.split);
  return split_for(cfg, data);
}

int grad_check(std::ostream& out) {
  auto results = run_gradient_suite();
  int failed = 0;
  for (const auto& r : results) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-4s %-24s seeds=%d max_err=%.3e",
                  r.passed() ? "ok" : "FAIL", r.name.c_str(), r.seeds, r.max_error);
    out << buf << '\n';
    if (!r.passed()) {
      out << "     " << r.first_failure << '\n';
      ++failed;
    }
  }
  out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size()
      << " gradient checks passed\n";
  return failed ? 2 : 0;
}

int dispatch(const std::string& cmd, const Options& o,
             const std::vector<std::string>& extra, std::ostream& out) {
  if (cmd == "grad-check") {
    if (!extra.empty()) throw ValidationError("grad-check takes no extra arguments");
    return grad_check(out);
  }
  ExperimentConfig cfg = build_config(o, extra);

  if (cmd == "gen-data") {
    if (!o.out.empty()) cfg.dataset_root = o.out;
    cfg.validate();
    auto records = generate_synthetic(cfg.generator, cfg.dataset_root);
    std::size_t pos = 0;
    for (const auto& r : records) pos += static_cast<std::size_t>(r.binary_label);
    out << "wrote " << records.size() << " images (" << pos << " referable) to "
        << cfg.dataset_root.string() << "\n";
    return 0;
  }

  cfg.validate();
  if (cmd == "run-all") {
    if (!o.out.empty()) cfg.run_dir = o.out;
    auto summary = run_all(cfg);
    write_report_table(out, summary.report);
    return 0;
  }

  const Dataset data = open_dataset(cfg);
  const DatasetSplit split = load_split(o, cfg, data);
  const PipelineContext ctx = make_context(cfg, data);
  const fs::path& dir = cfg.run_dir;
  auto save = [&](const fs::path& path, const Checkpoint& c) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_checkpoint(path, c);
    out << "wrote " << path.string() << "\n";
  };

  if (cmd == "split") {
    const fs::path path = or_default(o.out, dir / "split.csv");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_split(path, split);
    out << "labeled " << split.labeled.size() << ", unlabeled "
        << split.unlabeled.size() << ", test " << split.test.size()
        << ", labeled hash " << to_hex(hash_ids(split.labeled)) << "\n";
    return 0;
  }
  if (cmd == "pretrain") {
    auto r = pretrain(ctx, split.unlabeled, cfg.teacher, cfg.stage(Stage::Pretrain));
    save(or_default(o.out, dir / "pretrain.ckpt"), r.checkpoint);
    return 0;
  }
  if (cmd == "finetune") {
    auto in = load_checkpoint(o.checkpoints.empty() ? dir / "pretrain.ckpt"
                                                    : fs::path(o.checkpoints[0]));
    auto r = finetune(ctx, in, cfg.teacher, split.labeled,
                      cfg.stage(Stage::FinetuneTeacher));
    save(or_default(o.out, dir / "teacher.ckpt"), r.checkpoint);
    return 0;
  }
  if (cmd == "pseudo-label") {
    auto teacher = load_checkpoint(o.checkpoints.empty() ? dir / "teacher.ckpt"
                                                         : fs::path(o.checkpoints[0]));
    auto set = generate_pseudo_labels(ctx, teacher, split.unlabeled,
                                      cfg.pseudo_label.threshold);
    const fs::path path = or_default(o.out, dir / "pseudo_labels.csv");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_pseudo_labels(path, set);
    out << "wrote " << path.string() << "\n";
    return 0;
  }
  if (cmd == "distill") {
    auto teacher = load_checkpoint(or_default(o.teacher, dir / "teacher.ckpt"));
    auto labels = read_pseudo_labels(or_default(o.labels, dir / "pseudo_labels.csv"),
                                     cfg.pseudo_label.threshold);
    auto r = distill(ctx, cfg.student, teacher, labels, cfg.stage(Stage::Distill));
    save(or_default(o.out, dir / "student_distilled.ckpt"), r.checkpoint);
    return 0;
  }
  if (cmd == "finetune-student") {
    auto in = load_checkpoint(o.checkpoints.empty() ? dir / "student_distilled.ckpt"
                                                    : fs::path(o.checkpoints[0]));
    auto r = finetune_student(ctx, in, split.labeled, cfg.stage(Stage::FinetuneStudent));
    save(or_default(o.out, dir / "student.ckpt"), r.checkpoint);
    return 0;
  }
  if (cmd == "evaluate") {
    std::vector<fs::path> paths(o.checkpoints.begin(), o.checkpoints.end());
    if (paths.empty()) {
      for (const char* name : {"supervised_full", "supervised_baseline", "teacher", "student"})
        if (fs::exists(dir / (std::string(name) + ".ckpt")))
          paths.push_back(dir / (std::string(name) + ".ckpt"));
    }
    if (paths.empty()) throw ValidationError("evaluate: no checkpoints given");
    std::vector<int> y;
    for (const auto& id : split.test) y.push_back(data.at(id).binary_label);
    EvalReport report;
    for (const auto& p : paths) {
      auto scores = predict(ctx, load_checkpoint(p), split.test);
      report.models.push_back(evaluate_scores(p.stem().string(), scores, y));
    }
    write_report_table(out, report);
    if (!o.out.empty()) save_report(o.out, report);
    return 0;
  }
  throw ValidationError("unknown subcommand '" + cmd + "'");
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Semi-supervised referable-DR pipeline: contrastive pretraining, "
               "fine-tuning, pseudo-labeling and distillation"};
  app.name(args.empty() ? "ssl-distill" : args[0]);
  app.require_subcommand(1, 1);
  Options o;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"gen-data", "Generate the synthetic fundus dataset"},
      {"split", "Write the labeled/unlabeled/test split"},
      {"pretrain", "Stage 1: contrastive pretraining on unlabeled images"},
      {"finetune", "Stage 2: supervised fine-tuning of the teacher"},
      {"pseudo-label", "Teacher predictions on unlabeled images"},
      {"distill", "Stage 3: train the student on hard pseudo-labels"},
      {"finetune-student", "Stage 4: fine-tune the student on labeled images"},
      {"evaluate", "AUC and accuracy of checkpoints on the test split"},
      {"run-all", "All stages, baselines and the final report"},
      {"grad-check", "Finite-difference gradient suite"},
  };
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    if (std::string(s.name) == "grad-check") continue;
    add_common(sub, o);
    sub->add_option("--out", o.out, "Output path");
    const std::string name = s.name;
    if (name != "gen-data" && name != "run-all") {
      sub->add_option("--split", o.split, "Split CSV (default: derived from config)");
    }
    if (name == "finetune" || name == "pseudo-label" || name == "finetune-student" ||
        name == "evaluate") {
      sub->add_option("--checkpoint", o.checkpoints, "Input checkpoint");
    }
    if (name == "distill") {
      sub->add_option("--teacher", o.teacher, "Teacher checkpoint");
      sub->add_option("--labels", o.labels, "Pseudo-label CSV");
    }
    if (name == "pseudo-label") {
      sub->add_option("--threshold", o.threshold, "Hard-label threshold");
    }
    if (name == "split" || name == "run-all") {
      sub->add_option("--fraction", o.fraction, "Labeled fraction");
    }
  }

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code == 0 ? 0 : 1;
  }

  auto* sub = app.get_subcommands().front();
  try {
    return dispatch(sub->get_name(), o, sub->remaining(), out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    if (std::string(e.what()).find("unknown config key") != std::string::npos ||
        std::string(e.what()).find("unexpected argument") != std::string::npos) {
      err << sub->help();
    }
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ssld
