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

#include "ssld/data.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ssld/error.hpp"
#include "ssld/parallel.hpp"

namespace ssld {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoi(s, &pos);
  } catch (const std::logic_error&) {
    return false;
  }
  return pos == s.size();
}

std::ofstream open_for_write(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw RuntimeError("cannot write " + path.string());
  return out;
}

// Coverage-weighted disc blend: alpha falls off over one pixel at the rim.
void draw_disc(Image& img, double cy, double cx, double radius,
               const std::array<double, 3>& color, double alpha) {
  const long y0 = std::max(0L, static_cast<long>(std::floor(cy - radius - 1)));
  const long y1 = std::min(static_cast<long>(img.height) - 1,
                           static_cast<long>(std::ceil(cy + radius + 1)));
  const long x0 = std::max(0L, static_cast<long>(std::floor(cx - radius - 1)));
  const long x1 = std::min(static_cast<long>(img.width) - 1,
                           static_cast<long>(std::ceil(cx + radius + 1)));
  for (long y = y0; y <= y1; ++y)
    for (long x = x0; x <= x1; ++x) {
      const double d = std::hypot(static_cast<double>(y) - cy,
                                  static_cast<double>(x) - cx);
      const double cover = std::clamp(radius + 0.5 - d, 0.0, 1.0) * alpha;
      if (cover <= 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        float& p = img.at(c, static_cast<std::size_t>(y),
                          static_cast<std::size_t>(x));
        p = static_cast<float>(p * (1.0 - cover) + color[c] * cover);
      }
    }
}

}  // namespace

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

int binary_label_for_grade(int grade) {
  if (grade < 0 || grade > 4) {
    throw ValidationError("grade out of range: " + std::to_string(grade));
  }
  return grade >= 2 ? 1 : 0;
}

std::string ManifestRecord::id() const {
  return fs::path(filename).stem().string();
}

void write_manifest(const fs::path& path,
                    const std::vector<ManifestRecord>& records) {
  auto out = open_for_write(path);
  out << kManifestHeader << "\n";
  for (const auto& r : records) {
    out << r.filename << "," << r.grade << "," << r.binary_label << ","
        << to_string(r.split) << "\n";
  }
  if (!out) throw RuntimeError("error writing " + path.string());
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || strip_cr(line) != kManifestHeader) {
    throw FormatError("manifest header must be '" +
                      std::string(kManifestHeader) + "', line 1");
  }
  std::vector<ManifestRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = ", line " + std::to_string(line_no);
    auto f = split_csv_line(line);
    if (f.size() != 4) throw FormatError("expected 4 fields" + where);
    ManifestRecord r;
    r.filename = f[0];
    if (r.filename.empty()) throw FormatError("empty filename" + where);
    if (!parse_int(f[1], r.grade)) throw FormatError("malformed grade" + where);
    if (r.grade < 0 || r.grade > 4)
      throw FormatError("grade out of range" + where);
    if (!parse_int(f[2], r.binary_label) ||
        (r.binary_label != 0 && r.binary_label != 1)) {
      throw FormatError("binary_label must be 0 or 1" + where);
    }
    if (f[3] == "train") {
      r.split = Split::Train;
    } else if (f[3] == "test") {
      r.split = Split::Test;
    } else {
      throw FormatError("split must be train or test" + where);
    }
    if (r.binary_label != binary_label_for_grade(r.grade)) {
      throw ValidationError("binary_label " + std::to_string(r.binary_label) +
                            " inconsistent with grade " +
                            std::to_string(r.grade) + where);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_ppm(const fs::path& path, const Image& img) {
  if (img.channels != 3) throw ValidationError("PPM output needs 3 channels");
  auto out = open_for_write(path, true);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.height * img.width * 3);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(img.at(c, y, x)), 0.0, 1.0);
        bytes[(y * img.width + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeError("error writing " + path.string());
}

Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open image " + path.string());
  auto token = [&]() {
    std::string t;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
        continue;
      }
      t += ch;
    }
    return t;
  };
  if (token() != "P6") throw FormatError(path.string() + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  if (!parse_int(token(), w) || !parse_int(token(), h) ||
      !parse_int(token(), maxval) || w <= 0 || h <= 0 || maxval != 255) {
    throw FormatError(path.string() + ": unsupported PPM header");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  Image img(3, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(c, y, x) = bytes[(y * img.width + x) * 3 + c] / 255.0f;
  return img;
}

void GeneratorConfig::validate() const {
  if (n_train == 0 || n_test == 0)
    throw ValidationError("generator: n_train and n_test must be positive");
  if (image_size < 16)
    throw ValidationError("generator: image_size must be at least 16");
  double total = 0.0;
  for (double p : grade_distribution) {
    if (!(p >= 0.0)) throw ValidationError("generator: negative grade probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("generator: grade_distribution must sum to 1");
  }
}

Image render_fundus(int grade, std::size_t size, Rng rng) {
  binary_label_for_grade(grade);
  const double s = static_cast<double>(size);
  const double unit = s / 32.0;  // lesion sizes are tuned at 32 px
  Image img(3, size, size);
  for (auto& p : img.pixels) p = 0.02f;

  const double cy = s / 2.0 - 0.5 + rng.uniform(-1.5, 1.5) * unit;
  const double cx = s / 2.0 - 0.5 + rng.uniform(-1.5, 1.5) * unit;
  const double radius = s * rng.uniform(0.42, 0.46);
  const double illum = rng.uniform(0.85, 1.1);
  const std::array<double, 3> tint{0.78 * illum, 0.36 * illum, 0.17 * illum};
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double d = std::hypot(static_cast<double>(y) - cy,
                                  static_cast<double>(x) - cx);
      const double cover = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      if (cover <= 0.0) continue;
      const double falloff = 1.0 - 0.3 * (d / radius) * (d / radius);
      for (std::size_t c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(0.02 * (1 - cover) +
                                             tint[c] * falloff * cover);
    }

  // Optic disc: a pale highlight present in every eye.
  {
    const double angle = rng.uniform(0.0, 2.0 * 3.141592653589793);
    const double off = radius * rng.uniform(0.4, 0.5);
    draw_disc(img, cy + off * std::sin(angle), cx + off * std::cos(angle),
              radius * rng.uniform(0.15, 0.18), {0.98, 0.86, 0.62},
              rng.uniform(0.7, 0.8));
  }

  auto lesion_position = [&](double& ly, double& lx) {
    const double a = rng.uniform(0.0, 2.0 * 3.141592653589793);
    const double r = radius * 0.8 * std::sqrt(rng.uniform());
    ly = cy + r * std::sin(a);
    lx = cx + r * std::cos(a);
  };
  const std::array<double, 3> exudate{1.0, 0.92, 0.45};
  const std::array<double, 3> haemorrhage{0.28, 0.04, 0.03};
  double ly, lx;
  if (grade == 1) {
    lesion_position(ly, lx);
    draw_disc(img, ly, lx, rng.uniform(0.8, 1.3) * unit, haemorrhage,
              rng.uniform(0.5, 0.9));
  } else if (grade >= 2) {
    for (int i = 0; i < grade; ++i) {
      lesion_position(ly, lx);
      draw_disc(img, ly, lx, rng.uniform(1.0, 1.8) * unit, exudate,
                rng.uniform(0.5, 0.9));
    }
    for (int i = 0; i < 2 * grade; ++i) {
      lesion_position(ly, lx);
      draw_disc(img, ly, lx, rng.uniform(1.0, 1.8) * unit, haemorrhage,
                rng.uniform(0.5, 0.9));
    }
  }

  for (auto& p : img.pixels) {
    p = static_cast<float>(std::clamp(p + 0.03 * rng.normal(), 0.0, 1.0));
  }
  return img;
}

std::vector<ManifestRecord> generate_synthetic(const GeneratorConfig& cfg,
                                               const fs::path& root) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (ec) {
    throw RuntimeError("cannot create dataset directory " +
                       (root / "images").string() + ": " + ec.message());
  }
  const Rng base = Rng(cfg.seed).substream(stream::kGenerate);
  const std::size_t total = cfg.n_train + cfg.n_test;
  const int digits = std::max<int>(5, static_cast<int>(std::to_string(total).size()));
  std::vector<ManifestRecord> records;
  records.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng = base.substream(i);
    const double u = rng.uniform();
    int grade = 4;
    double acc = 0.0;
    for (int g = 0; g < 5; ++g) {
      acc += cfg.grade_distribution[g];
      if (u < acc && cfg.grade_distribution[g] > 0.0) {
        grade = g;
        break;
      }
    }
    while (cfg.grade_distribution[grade] == 0.0 && grade > 0) --grade;
    std::ostringstream name;
    name << "img" << std::setw(digits) << std::setfill('0') << i << ".ppm";
    write_ppm(root / "images" / name.str(),
              render_fundus(grade, cfg.image_size, rng.substream(1)));
    records.push_back({name.str(), grade, binary_label_for_grade(grade),
                       i < cfg.n_train ? Split::Train : Split::Test});
  }
  write_manifest(root / "manifest.csv", records);
  return records;
}

Image preprocess(const Image& img, std::size_t size, float threshold) {
  if (img.empty()) throw ValidationError("preprocess: empty image");
  long y0 = -1, y1 = -1, x0 = -1, x1 = -1;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      double m = 0.0;
      for (std::size_t c = 0; c < img.channels; ++c) m += img.at(c, y, x);
      if (m / static_cast<double>(img.channels) <= threshold) continue;
      const long yy = static_cast<long>(y), xx = static_cast<long>(x);
      if (y0 < 0 || yy < y0) y0 = yy;
      if (yy > y1) y1 = yy;
      if (x0 < 0 || xx < x0) x0 = xx;
      if (xx > x1) x1 = xx;
    }
  if (y0 < 0) throw ValidationError("preprocess: blank image, no fundus disc found");
  const double h = static_cast<double>(y1 - y0 + 1);
  const double w = static_cast<double>(x1 - x0 + 1);
  const double side = std::max(h, w);
  const double cy = static_cast<double>(y0) + h / 2.0;
  const double cx = static_cast<double>(x0) + w / 2.0;
  return resample_box(img, cx - side / 2.0, cy - side / 2.0, side, side, size,
                      size, Border::Zero);
}

const ImageSample& Dataset::at(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw ValidationError("unknown sample id '" + id + "'");
  return samples[it->second];
}

std::vector<ManifestRecord> Dataset::records() const {
  std::vector<ManifestRecord> out;
  for (const auto& s : samples)
    out.push_back({s.id + ".ppm", s.grade, s.binary_label, s.split});
  return out;
}

Dataset load_dataset(const fs::path& root, std::size_t image_size,
                     unsigned workers) {
  if (!fs::is_directory(root)) {
    throw ValidationError("dataset directory not found: " + root.string());
  }
  auto records = read_manifest(root / "manifest.csv");
  Dataset ds;
  ds.samples.resize(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const auto& r = records[i];
    ImageSample& s = ds.samples[i];
    s.id = r.id();
    s.grade = r.grade;
    s.binary_label = r.binary_label;
    s.split = r.split;
    s.pixels = preprocess(read_ppm(root / "images" / r.filename), image_size);
  });
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (!ds.index.emplace(ds.samples[i].id, i).second) {
      throw ValidationError("duplicate sample id '" + ds.samples[i].id + "'");
    }
  }
  return ds;
}

DatasetSplit make_split(const std::vector<ManifestRecord>& records,
                        double label_fraction, std::uint64_t seed) {
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    throw ValidationError("label fraction must lie in (0, 1], got " +
                          std::to_string(label_fraction));
  }
  std::vector<std::string> train;
  DatasetSplit split;
  split.label_fraction = label_fraction;
  for (const auto& r : records) {
    (r.split == Split::Train ? train : split.test).push_back(r.id());
  }
  const auto n_labeled = static_cast<std::size_t>(
      std::llround(label_fraction * static_cast<double>(train.size())));
  if (n_labeled == 0) {
    throw ValidationError("label fraction " + std::to_string(label_fraction) +
                          " selects no labeled images out of " +
                          std::to_string(train.size()));
  }
  Rng rng = Rng(seed).substream(stream::kSplit);
  rng.shuffle(train);
  split.labeled.assign(train.begin(), train.begin() + n_labeled);
  split.unlabeled.assign(train.begin() + n_labeled, train.end());
  std::sort(split.labeled.begin(), split.labeled.end());
  std::sort(split.unlabeled.begin(), split.unlabeled.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void write_split(const fs::path& path, const DatasetSplit& split) {
  auto out = open_for_write(path);
  out << "id,set\n";
  for (const auto& id : split.labeled) out << id << ",labeled\n";
  for (const auto& id : split.unlabeled) out << id << ",unlabeled\n";
  for (const auto& id : split.test) out << id << ",test\n";
  if (!out) throw RuntimeError("error writing " + path.string());
}

DatasetSplit read_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open split file " + path.string());
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "id,set") {
    throw FormatError("split file header must be 'id,set', line 1");
  }
  DatasetSplit split;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 2 || f[0].empty()) {
      throw FormatError("malformed split entry, line " + std::to_string(line_no));
    }
    if (f[1] == "labeled") {
      split.labeled.push_back(f[0]);
    } else if (f[1] == "unlabeled") {
      split.unlabeled.push_back(f[0]);
    } else if (f[1] == "test") {
      split.test.push_back(f[0]);
    } else {
      throw FormatError("unknown set '" + f[1] + "', line " +
                        std::to_string(line_no));
    }
  }
  for (auto* v : {&split.labeled, &split.unlabeled, &split.test})
    std::sort(v->begin(), v->end());
  const auto train = split.labeled.size() + split.unlabeled.size();
  if (split.labeled.empty()) throw ValidationError("split has no labeled ids");
  split.label_fraction =
      static_cast<double>(split.labeled.size()) / static_cast<double>(train);
  return split;
}

Sha256 hash_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::string buf;
  for (const auto& id : ids) {
    buf += id;
    buf += '\n';
  }
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(buf.data(), buf.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw RuntimeError("SHA-256 computation failed");
  }
  return out;
}

std::string to_hex(const Sha256& h) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto b : h) {
    s += digits[b >> 4];
    s += digits[b & 15];
  }
  return s;
}

}  // namespace ssld
