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

#ifndef HESSL_SEPARATION_HPP
#define HESSL_SEPARATION_HPP

#include <span>
#include <string>

#include "hessl/image.hpp"
#include "hessl/stain_model.hpp"

namespace hessl::separation {

enum class Stain { kHematoxylin, kEosin };

/// Normalized single-stain concentrations in [0, 1].
struct ConcentrationImage {
  Plane<float> values;
  Stain stain = Stain::kHematoxylin;
  /// Slide whose basis produced the map.
  std::string slide_id;
};

struct RawConcentrations {
  Plane<double> h;
  Plane<double> e;
};

/// alpha = Mat_{RGB->HERes} * OD per pixel, residual dropped. Values are
/// unclamped and may be slightly negative.
RawConcentrations separate_concentrations(const RgbImage& img, const stain_model::StainBasis& basis);

/// clamp(raw * 0.5 / norm, 0, 1). norm <= 0 raises kInvalidBasis.
ConcentrationImage normalize_concentrations(const Plane<double>& raw, double norm, Stain stain,
                                            const std::string& slide_id = {});
float normalize_value(double raw, double norm) noexcept;

/// 99th percentile with linear interpolation between order statistics.
/// Needs at least 100 values.
double compute_norm(std::span<const double> values);
/// Percentile q in [0, 1], same interpolation rule, any non-empty input.
double percentile(std::span<const double> values, double q);

struct Reconstruction {
  RgbImage image;
  /// True when the maps were produced with a different slide's basis.
  bool cross_basis = false;
};

/// Inverse of separation with the residual set to zero.
Reconstruction reconstruct_rgb(const ConcentrationImage& h, const ConcentrationImage& e,
                               const stain_model::StainBasis& basis);

/// Convenience: separate then normalize with the basis norms.
std::pair<ConcentrationImage, ConcentrationImage> separate_normalized(const RgbImage& img,
                                                                      const stain_model::StainBasis& basis);

}  // namespace hessl::separation

#endif  // HESSL_SEPARATION_HPP
