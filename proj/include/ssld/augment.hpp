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

#include <string>
#include <utility>
#include <vector>

#include "ssld/image.hpp"
#include "ssld/rng.hpp"

namespace ssld {

/// Random transform magnitudes. Jitter factors are drawn uniformly from
/// [1 - r, 1 + r] for brightness, contrast and saturation; the hue shift is
/// drawn from [-hue, hue] in turns of the colour wheel.
///
/// The weak policy may only enable colour jitter and horizontal flips; the
/// strong one adds random crops and rotations.
struct AugmentationPolicy {
  enum class Kind { Strong, Weak };

  Kind kind = Kind::Strong;
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  double hue = 0.0;
  double crop_scale_min = 1.0;  // minimum kept area fraction
  double rotation_max = 0.0;    // degrees
  double hflip_prob = 0.0;

  static AugmentationPolicy strong();
  static AugmentationPolicy weak();
  // No-op transform (all ranges zero).
  static AugmentationPolicy identity(Kind kind = Kind::Strong);

  // Range checks, plus the weak-policy restriction.
  void validate() const;
  std::string name() const { return kind == Kind::Strong ? "strong" : "weak"; }
};

// Individual colour operations; factor 1 (shift 0) is the identity.
// Luma weights are 0.299 R + 0.587 G + 0.114 B.
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
// Rotates hue through an RGB -> HSV -> RGB round trip.
Image adjust_hue(const Image& img, double shift);

Image hflip(const Image& img);
// Rotation about the image centre with bilinear sampling and zero fill.
Image rotate(const Image& img, double degrees);

/// Applies one random draw of the policy, in a fixed order: crop, rotation,
/// flip, brightness, contrast, saturation, hue. Output has the input shape
/// and is clamped to [0, 1].
Image augment(const Image& image, const AugmentationPolicy& policy, Rng rng);

/// Two independent augmentations from substreams 0 and 1 of `rng`.
std::pair<Image, Image> make_view_pair(const Image& image,
                                       const AugmentationPolicy& policy,
                                       const Rng& rng);

/// Expands N images into 2N views ordered [a1, b1, a2, b2, ...], image k
/// drawing from rngs[k]. Views are computed on up to `workers` threads.
std::vector<Image> make_view_batch(const std::vector<const Image*>& images,
                                   const AugmentationPolicy& policy,
                                   const std::vector<Rng>& rngs,
                                   unsigned workers = 1);

}  // namespace ssld
