// Copyright 2026 The hessl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HESSL_AUGMENT_HPP
#define HESSL_AUGMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hessl/image.hpp"
#include "hessl/rng.hpp"
#include "hessl/separation.hpp"

namespace hessl::augment {

enum class Rotation { kNone, kRightAngle, kContinuous };

struct AugmentPolicy {
  double rgb_brightness_jitter = 0.15;
  double rgb_contrast_jitter = 0.15;
  double rgb_saturation_jitter = 0.15;
  int crop_size = 256;
  Rotation rotation = Rotation::kRightAngle;
  /// Continuous rotation draws from [-max_rotation_deg, max_rotation_deg].
  double max_rotation_deg = 180.0;
  bool flip_horizontal = true;
  bool flip_vertical = true;
  double he_brightness_jitter = 0.15;
  std::uint64_t seed = 0;
  /// Validation and test tiles get a centre crop to crop_size.
  bool eval_center_crop = true;

  /// Throws kInvalidInput when the policy cannot be applied to a tile of
  /// the given size.
  void validate(int tile_width, int tile_height) const;
  /// No jitter, no rotation or flips.
  static AugmentPolicy identity(int crop_size);
};

struct Draw {
  std::string channel;  // "rgb", "h" or "e"
  std::string op;
  double value = 0.0;
  bool operator==(const Draw&) const = default;
};
using DrawLog = std::vector<Draw>;

struct AugmentedPair {
  separation::ConcentrationImage h;
  separation::ConcentrationImage e;
  DrawLog draw_log;
};

RgbImage adjust_brightness(const RgbImage& img, double factor);
/// Blend with the mean luma of the whole image.
RgbImage adjust_contrast(const RgbImage& img, double factor);
/// Blend with each pixel's luma; factor 0 gives a grey image.
RgbImage adjust_saturation(const RgbImage& img, double factor);

/// Brightness, contrast, then saturation, each factor uniform in
/// [1 - j, 1 + j] and each result clamped to [0, I0].
RgbImage jitter_rgb(const RgbImage& img, const AugmentPolicy& policy, Stream& rng, DrawLog* log = nullptr);

/// Independent rotate -> crop -> flip -> brightness for H and E. The H
/// draws come from rng.child({0}) and the E draws from rng.child({1}).
AugmentedPair augment_he_pair(const separation::ConcentrationImage& h_full,
                              const separation::ConcentrationImage& e_full, const AugmentPolicy& policy,
                              const Stream& rng);

Plane<float> rotate90(const Plane<float>& p, int quarter_turns);
/// Bilinear resampling about the image centre with reflect padding.
Plane<float> rotate_continuous(const Plane<float>& p, double degrees);
Plane<float> crop(const Plane<float>& p, int x, int y, int size);
Plane<float> center_crop(const Plane<float>& p, int size);
Plane<float> flip(const Plane<float>& p, bool horizontal);

/// One JSON object per line.
std::string draw_log_jsonl(const DrawLog& log);

}  // namespace hessl::augment

#endif  // HESSL_AUGMENT_HPP
