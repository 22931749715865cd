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
#include <span>
#include <string>
#include <vector>

#include "ssld/data.hpp"
#include "ssld/models.hpp"

namespace ssld {

enum class Stage : std::uint8_t {
  Pretrain = 0,
  FinetuneTeacher = 1,
  PseudoLabel = 2,
  Distill = 3,
  FinetuneStudent = 4,
  Supervised = 5,  // baseline trained from scratch on labels only
};

std::string to_string(Stage s);

/// Hand-off artifact between stages.
///
/// Layout (all integers little-endian):
///   "SSLCKPT1" | u32 format_version | u32 len, spec name (UTF-8)
///   | 32-byte split hash | u32 tensor count
///   | per tensor: u32 len, name | u32 ndim | u64 dims... | f32 values...
///
/// Stage provenance and the seed travel as reserved tensors under "meta.";
/// they are stripped from `tensors` on load.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  std::string spec_name;
  Sha256 split_hash{};
  std::vector<Stage> provenance;
  std::uint64_t seed = 0;
  StateDict tensors;

  Stage last_stage() const;
  const Tensor& tensor(const std::string& name) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ValidationError unless the provenance equals `expected` exactly.
void require_provenance(const Checkpoint& ckpt,
                        const std::vector<Stage>& expected,
                        const std::string& consumer);

}  // namespace ssld
