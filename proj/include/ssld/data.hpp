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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssld/image.hpp"
#include "ssld/rng.hpp"

namespace ssld {

enum class Split { Train, Test };

std::string to_string(Split s);

// Grades 0-1 are non-referable (0), grades 2-4 referable (1).
int binary_label_for_grade(int grade);

struct ManifestRecord {
  std::string filename;  // relative to <root>/images
  int grade = 0;
  int binary_label = 0;
  Split split = Split::Train;

  std::string id() const;  // filename without extension
  bool operator==(const ManifestRecord&) const = default;
};

inline constexpr const char* kManifestHeader = "filename,grade,binary_label,split";

/// Writes `filename,grade,binary_label,split` CSV with the fixed header.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestRecord>& records);

/// Parses a manifest. Malformed lines raise FormatError carrying the 1-based
/// line number; a label that disagrees with its grade raises ValidationError.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255) <-> [0,1] float image.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

struct GeneratorConfig {
  std::size_t n_train = 2000;
  std::size_t n_test = 400;
  std::size_t image_size = 32;
  std::array<double, 5> grade_distribution{0.45, 0.20, 0.20, 0.10, 0.05};
  std::uint64_t seed = 7;

  void validate() const;
};

/// Draws one synthetic fundus photograph: dark frame, bright disc with an
/// optic-disc highlight, and grade-dependent lesions (one small dark dot at
/// grade 1; g bright exudate blobs and 2g dark haemorrhage dots at grade
/// g >= 2), plus pixel noise.
Image render_fundus(int grade, std::size_t size, Rng rng);

/// Writes <root>/images/*.ppm and <root>/manifest.csv. Each sample depends
/// only on (seed, index).
std::vector<ManifestRecord> generate_synthetic(const GeneratorConfig& cfg,
                                               const std::filesystem::path& root);

inline constexpr float kDiscThreshold = 0.1f;

/// Centres the fundus disc: finds the bounding box of pixels whose channel
/// mean exceeds `threshold`, crops the enclosing square (zero outside the
/// frame) and bilinearly resizes it to size x size.
Image preprocess(const Image& img, std::size_t size,
                 float threshold = kDiscThreshold);

struct ImageSample {
  std::string id;
  Image pixels;
  int grade = 0;
  int binary_label = 0;
  Split split = Split::Train;
};

/// Samples of a dataset directory, preprocessed to a common size.
struct Dataset {
  std::vector<ImageSample> samples;
  std::unordered_map<std::string, std::size_t> index;

  const ImageSample& at(const std::string& id) const;
  std::vector<ManifestRecord> records() const;
};

Dataset load_dataset(const std::filesystem::path& root, std::size_t image_size,
                     unsigned workers = 1);

struct DatasetSplit {
  std::vector<std::string> labeled;    // sorted
  std::vector<std::string> unlabeled;  // sorted
  std::vector<std::string> test;       // sorted
  double label_fraction = 1.0;
};

/// Uniformly random labeled subset of round(fraction * |train|) train ids.
DatasetSplit make_split(const std::vector<ManifestRecord>& records,
                        double label_fraction, std::uint64_t seed);

// `id,set` CSV with set in {labeled, unlabeled, test}.
void write_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& path);

using Sha256 = std::array<std::uint8_t, 32>;

/// SHA-256 over the sorted ids, each terminated by '\n'.
Sha256 hash_ids(std::vector<std::string> ids);
std::string to_hex(const Sha256& h);

}  // namespace ssld
