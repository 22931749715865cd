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

#include <cstddef>
#include <span>
#include <vector>

#include "ssld/tensor.hpp"

namespace ssld {

/// Planar (C x H x W) float image, values nominally in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  bool empty() const { return pixels.empty(); }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

enum class Border { Clamp, Zero };

/// Bilinear sample at continuous pixel-centre coordinates (x, y).
float sample_bilinear(const Image& img, std::size_t c, double y, double x,
                      Border border);

/// Resamples the axis-aligned box [x0, x0+w) x [y0, y0+h) (in pixel units)
/// to an out_h x out_w image. A box equal to the full frame at the same size
/// reproduces the input exactly.
Image resample_box(const Image& img, double x0, double y0, double w, double h,
                   std::size_t out_h, std::size_t out_w, Border border);

/// Stacks equally sized images into a [B, C, H, W] tensor.
Tensor stack_images(std::span<const Image> images);

}  // namespace ssld
