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

#include "ssld/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ssld/error.hpp"
#include "ssld/parallel.hpp"

namespace ssld {

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

float clamp01(double v) {
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

double luma(const Image& img, std::size_t y, std::size_t x) {
  return kLumaR * img.at(0, y, x) + kLumaG * img.at(1, y, x) +
         kLumaB * img.at(2, y, x);
}

void require_nonempty(const Image& img) {
  if (img.empty() || img.channels == 0) {
    throw ValidationError("augment: empty image");
  }
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s,
                double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d == 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = (g - b) / d;
  } else if (mx == g) {
    h = 2.0 + (b - r) / d;
  } else {
    h = 4.0 + (r - g) / d;
  }
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g,
                double& b) {
  const double h6 = h * 6.0;
  const double sector = std::floor(h6);
  const double f = h6 - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(sector) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

AugmentationPolicy AugmentationPolicy::strong() {
  AugmentationPolicy p;
  p.kind = Kind::Strong;
  p.brightness = 0.4;
  p.contrast = 0.4;
  p.saturation = 0.4;
  p.hue = 0.1;
  p.crop_scale_min = 0.6;
  p.rotation_max = 30.0;
  p.hflip_prob = 0.5;
  return p;
}

AugmentationPolicy AugmentationPolicy::weak() {
  AugmentationPolicy p;
  p.kind = Kind::Weak;
  p.brightness = 0.2;
  p.contrast = 0.2;
  p.hflip_prob = 0.5;
  return p;
}

AugmentationPolicy AugmentationPolicy::identity(Kind kind) {
  AugmentationPolicy p;
  p.kind = kind;
  return p;
}

void AugmentationPolicy::validate() const {
  auto fail = [&](const std::string& why) {
    throw ValidationError("augmentation policy '" + name() + "': " + why);
  };
  for (double r : {brightness, contrast, saturation, hue}) {
    if (!(r >= 0.0 && r < 1.0)) fail("jitter ranges must lie in [0, 1)");
  }
  if (!(crop_scale_min > 0.0 && crop_scale_min <= 1.0))
    fail("crop_scale_min must lie in (0, 1]");
  if (!(rotation_max >= 0.0 && rotation_max <= 180.0))
    fail("rotation_max must lie in [0, 180]");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0))
    fail("hflip_prob must lie in [0, 1]");
  if (kind == Kind::Weak && (crop_scale_min != 1.0 || rotation_max != 0.0))
    fail("weak policy cannot crop or rotate");
}

Image adjust_brightness(const Image& img, double factor) {
  Image out = img;
  for (auto& p : out.pixels) p = clamp01(p * factor);
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  Image out = img;
  double mean = 0.0;
  if (img.channels == 3) {
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) mean += luma(img, y, x);
    mean /= static_cast<double>(img.height * img.width);
  } else {
    for (float p : img.pixels) mean += p;
    mean /= static_cast<double>(img.pixels.size());
  }
  for (auto& p : out.pixels) p = clamp01(mean + factor * (p - mean));
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  if (img.channels != 3) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double l = luma(img, y, x);
      for (std::size_t c = 0; c < 3; ++c)
        out.at(c, y, x) = clamp01(l + factor * (img.at(c, y, x) - l));
    }
  return out;
}

Image adjust_hue(const Image& img, double shift) {
  if (img.channels != 3) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      double h, s, v, r, g, b;
      rgb_to_hsv(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x), h, s, v);
      h += shift;
      h -= std::floor(h);
      hsv_to_rgb(h, s, v, r, g, b);
      out.at(0, y, x) = clamp01(r);
      out.at(1, y, x) = clamp01(g);
      out.at(2, y, x) = clamp01(b);
    }
  return out;
}

Image hflip(const Image& img) {
  Image out = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

Image rotate(const Image& img, double degrees) {
  Image out(img.channels, img.height, img.width);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      // Inverse map: rotate the output coordinate by -theta.
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(c, y, x) = sample_bilinear(img, c, sy, sx, Border::Zero);
    }
  return out;
}

Image augment(const Image& image, const AugmentationPolicy& policy, Rng rng) {
  require_nonempty(image);
  policy.validate();
  Image img = image;
  if (policy.crop_scale_min < 1.0) {
    const double area = rng.uniform(policy.crop_scale_min, 1.0);
    const double side = std::sqrt(area);
    const double w = side * static_cast<double>(img.width);
    const double h = side * static_cast<double>(img.height);
    const double x0 = rng.uniform(0.0, static_cast<double>(img.width) - w);
    const double y0 = rng.uniform(0.0, static_cast<double>(img.height) - h);
    img = resample_box(img, x0, y0, w, h, img.height, img.width,
                       Border::Clamp);
  }
  if (policy.rotation_max > 0.0) {
    img = rotate(img, rng.uniform(-policy.rotation_max, policy.rotation_max));
  }
  if (policy.hflip_prob > 0.0 && rng.bernoulli(policy.hflip_prob)) {
    img = hflip(img);
  }
  auto factor = [&](double r) { return rng.uniform(1.0 - r, 1.0 + r); };
  if (policy.brightness > 0.0) img = adjust_brightness(img, factor(policy.brightness));
  if (policy.contrast > 0.0) img = adjust_contrast(img, factor(policy.contrast));
  if (policy.saturation > 0.0) img = adjust_saturation(img, factor(policy.saturation));
  if (policy.hue > 0.0) img = adjust_hue(img, rng.uniform(-policy.hue, policy.hue));
  for (auto& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
  return img;
}

std::pair<Image, Image> make_view_pair(const Image& image,
                                       const AugmentationPolicy& policy,
                                       const Rng& rng) {
  return {augment(image, policy, rng.substream(0)),
          augment(image, policy, rng.substream(1))};
}

std::vector<Image> make_view_batch(const std::vector<const Image*>& images,
                                   const AugmentationPolicy& policy,
                                   const std::vector<Rng>& rngs,
                                   unsigned workers) {
  if (rngs.size() != images.size()) {
    throw ValidationError("make_view_batch: one rng per image required");
  }
  std::vector<Image> views(2 * images.size());
  parallel_for(images.size(), workers, [&](std::size_t k) {
    auto [a, b] = make_view_pair(*images[k], policy, rngs[k]);
    views[2 * k] = std::move(a);
    views[2 * k + 1] = std::move(b);
  });
  return views;
}

}  // namespace ssld
