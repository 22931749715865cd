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

#include "ssld/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ssld/error.hpp"

namespace ssld {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'L', 'C', 'K', 'P', 'T', '1'};
const std::string kMetaProvenance = "meta.provenance";
const std::string kMetaSeed = "meta.seed";

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    le(u);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("checkpoint truncated");
  }
  template <class T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<T>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  float f32() {
    auto u = le<std::uint32_t>();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void copy(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, b_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const Tensor& t) {
  w.le(static_cast<std::uint32_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.le(static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape()) w.le(static_cast<std::uint64_t>(d));
  for (float v : t.data()) w.f32(v);
}

}  // namespace

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Pretrain: return "pretrain";
    case Stage::FinetuneTeacher: return "finetune_teacher";
    case Stage::PseudoLabel: return "pseudo_label";
    case Stage::Distill: return "distill";
    case Stage::FinetuneStudent: return "finetune_student";
    case Stage::Supervised: return "supervised";
  }
  return "unknown";
}

Stage Checkpoint::last_stage() const {
  if (provenance.empty()) throw ValidationError("checkpoint has no provenance");
  return provenance.back();
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw ValidationError("checkpoint has no tensor '" + name + "'");
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.le(ckpt.format_version);
  w.le(static_cast<std::uint32_t>(ckpt.spec_name.size()));
  w.bytes(ckpt.spec_name.data(), ckpt.spec_name.size());
  w.bytes(ckpt.split_hash.data(), ckpt.split_hash.size());
  w.le(static_cast<std::uint32_t>(ckpt.tensors.size() + 2));

  std::vector<float> stages;
  for (auto s : ckpt.provenance) stages.push_back(static_cast<float>(s));
  const std::size_t n_stages = stages.size();
  write_tensor(w, kMetaProvenance, Tensor::from({n_stages}, std::move(stages)));
  // 16-bit limbs are exact in float.
  std::vector<float> limbs(4);
  for (int i = 0; i < 4; ++i)
    limbs[i] = static_cast<float>((ckpt.seed >> (16 * i)) & 0xffff);
  write_tensor(w, kMetaSeed, Tensor::from({4}, std::move(limbs)));

  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("meta.", 0) == 0) {
      throw ValidationError("tensor name '" + name + "' uses reserved prefix");
    }
    write_tensor(w, name, t);
  }
  return w.take();
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  Reader r(bytes.subspan(sizeof(kMagic)));
  Checkpoint ckpt;
  ckpt.format_version = r.le<std::uint32_t>();
  if (ckpt.format_version != Checkpoint::kFormatVersion) {
    throw FormatError("unsupported checkpoint format version " +
                      std::to_string(ckpt.format_version));
  }
  ckpt.spec_name = r.str(r.le<std::uint32_t>());
  r.copy(ckpt.split_hash.data(), ckpt.split_hash.size());
  const auto count = r.le<std::uint32_t>();
  bool have_provenance = false, have_seed = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.le<std::uint32_t>());
    const auto ndim = r.le<std::uint32_t>();
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<std::size_t>(r.le<std::uint64_t>()));
    const std::size_t n = shape_numel(shape);
    r.need(n * 4);
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    if (name == kMetaProvenance) {
      for (float v : values) {
        if (v < 0 || v > static_cast<float>(Stage::Supervised) || v != std::floor(v))
          throw FormatError("invalid stage code in checkpoint provenance");
        ckpt.provenance.push_back(static_cast<Stage>(static_cast<int>(v)));
      }
      have_provenance = true;
    } else if (name == kMetaSeed) {
      if (n != 4) throw FormatError("malformed checkpoint seed");
      for (int k = 0; k < 4; ++k)
        ckpt.seed |= static_cast<std::uint64_t>(values[k]) << (16 * k);
      have_seed = true;
    } else {
      ckpt.tensors.emplace_back(std::move(name),
                                Tensor::from(std::move(shape), std::move(values)));
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  if (!have_provenance || !have_seed) {
    throw FormatError("checkpoint lacks provenance metadata");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeError("error writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void require_provenance(const Checkpoint& ckpt,
                        const std::vector<Stage>& expected,
                        const std::string& consumer) {
  if (ckpt.provenance == expected) return;
  auto chain = [](const std::vector<Stage>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += "->";
      s += to_string(v[i]);
    }
    return s.empty() ? std::string("<none>") : s;
  };
  throw ValidationError(consumer + ": checkpoint provenance " +
                        chain(ckpt.provenance) + " is out of order, expected " +
                        chain(expected));
}

}  // namespace ssld
