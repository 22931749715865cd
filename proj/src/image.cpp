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

#include "ssld/image.hpp"

#include <algorithm>
#include <cmath>

#include "ssld/error.hpp"

namespace ssld {

float sample_bilinear(const Image& img, std::size_t c, double y, double x,
                      Border border) {
  const long H = static_cast<long>(img.height);
  const long W = static_cast<long>(img.width);
  if (border == Border::Clamp) {
    y = std::clamp(y, 0.0, static_cast<double>(H - 1));
    x = std::clamp(x, 0.0, static_cast<double>(W - 1));
  }
  const double fy = std::floor(y), fx = std::floor(x);
  const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
  const double dy = y - fy, dx = x - fx;
  auto px = [&](long yy, long xx) -> double {
    if (yy < 0 || yy >= H || xx < 0 || xx >= W) {
      if (border == Border::Zero) return 0.0;
      yy = std::clamp(yy, 0L, H - 1);
      xx = std::clamp(xx, 0L, W - 1);
    }
    return img.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
  };
  // Exact pixel hits skip the blend so identity resampling is lossless.
  if (dy == 0.0 && dx == 0.0) return static_cast<float>(px(y0, x0));
  const double top = px(y0, x0) * (1 - dx) + px(y0, x0 + 1) * dx;
  const double bottom = px(y0 + 1, x0) * (1 - dx) + px(y0 + 1, x0 + 1) * dx;
  return static_cast<float>(top * (1 - dy) + bottom * dy);
}

Image resample_box(const Image& img, double x0, double y0, double w, double h,
                   std::size_t out_h, std::size_t out_w, Border border) {
  if (img.empty()) throw ValidationError("resample of an empty image");
  Image out(img.channels, out_h, out_w);
  const double sx = w / static_cast<double>(out_w);
  const double sy = h / static_cast<double>(out_h);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double y = y0 + (static_cast<double>(oy) + 0.5) * sy - 0.5;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double x = x0 + (static_cast<double>(ox) + 0.5) * sx - 0.5;
        out.at(c, oy, ox) = sample_bilinear(img, c, y, x, border);
      }
    }
  return out;
}

Tensor stack_images(std::span<const Image> images) {
  if (images.empty()) throw ValidationError("stack_images: no images");
  const Image& first = images.front();
  const std::size_t per = first.pixels.size();
  std::vector<float> data(images.size() * per);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& im = images[i];
    if (im.channels != first.channels || im.height != first.height ||
        im.width != first.width) {
      throw ShapeError("stack_images: image " + std::to_string(i) +
                       " differs in size from the first image");
    }
    std::copy(im.pixels.begin(), im.pixels.end(), data.begin() + i * per);
  }
  return Tensor::from({images.size(), first.channels, first.height,
                       first.width},
                      std::move(data));
}

}  // namespace ssld
