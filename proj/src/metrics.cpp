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

#include "ssld/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "ssld/error.hpp"

namespace ssld {

namespace {

struct ClassCounts {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

ClassCounts check_binary(std::span<const float> scores,
                         std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels differ in length");
  }
  ClassCounts c;
  for (int y : labels) {
    if (y == 1) ++c.pos;
    else if (y == 0) ++c.neg;
    else throw ValidationError("labels must be 0 or 1");
  }
  if (c.pos == 0 || c.neg == 0) {
    throw ValidationError("auc needs both classes, got a single class");
  }
  return c;
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const float> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double auc(std::span<const float> scores, std::span<const int> labels) {
  const auto counts = check_binary(scores, labels);
  auto order = descending(scores);
  // Doubled count: 2 per strict win, 1 per tie, so everything stays integral.
  std::uint64_t twice = 0;
  std::uint64_t neg_below = counts.neg;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, n = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? p : n) += 1;
      ++j;
    }
    neg_below -= n;
    twice += p * (2 * neg_below + n);
    i = j;
  }
  return static_cast<double>(twice) /
         static_cast<double>(2 * counts.pos * counts.neg);
}

std::vector<RocPoint> roc_curve(std::span<const float> scores,
                                std::span<const int> labels) {
  const auto counts = check_binary(scores, labels);
  auto order = descending(scores);
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(counts.neg),
                     static_cast<double>(tp) / static_cast<double>(counts.pos)});
    i = j;
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) *
            (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

double accuracy(std::span<const float> scores, std::span<const int> labels,
                double threshold) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels differ in length");
  }
  if (scores.empty()) throw ValidationError("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] >= threshold ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

ModelResult evaluate_scores(const std::string& name,
                            std::span<const float> scores,
                            std::span<const int> labels) {
  ModelResult r;
  r.name = name;
  r.auc = auc(scores, labels);
  r.accuracy = accuracy(scores, labels);
  r.n_test = scores.size();
  r.roc = roc_curve(scores, labels);
  return r;
}

const ModelResult& EvalReport::at(const std::string& name) const {
  for (const auto& m : models)
    if (m.name == name) return m;
  throw ValidationError("report has no model '" + name + "'");
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << kReportHeader << '\n';
  for (const auto& m : report.models) {
    out << m.name << ',' << fmt(m.auc) << ',' << fmt(m.accuracy) << ','
        << m.n_test << '\n';
  }
}

void write_report_table(std::ostream& out, const EvalReport& report) {
  std::size_t width = 5;
  for (const auto& m : report.models) width = std::max(width, m.name.size());
  auto pad = [&](const std::string& s) {
    return s + std::string(width - s.size(), ' ');
  };
  out << pad("model") << "  auc       accuracy  n_test\n";
  out << std::string(width, '-') << "  --------  --------  ------\n";
  for (const auto& m : report.models) {
    out << pad(m.name) << "  " << fmt(m.auc) << "  " << fmt(m.accuracy)
        << "  " << m.n_test << '\n';
  }
}

void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve) {
  out << "fpr,tpr\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.fpr, p.tpr);
    out << buf;
  }
}

void save_report(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw RuntimeError("cannot write " + p.string());
    return f;
  };
  {
    auto f = open(dir / "report.csv");
    write_report_csv(f, report);
  }
  {
    auto f = open(dir / "report.txt");
    write_report_table(f, report);
  }
  for (const auto& m : report.models) {
    auto f = open(dir / ("roc_" + m.name + ".csv"));
    write_roc_csv(f, m.roc);
  }
}

}  // namespace ssld
