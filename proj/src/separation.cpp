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

#include "hessl/separation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hessl/od_color.hpp"

namespace hessl::separation {

using stain_model::StainBasis;
using stain_model::Vec3;

RawConcentrations separate_concentrations(const RgbImage& img, const StainBasis& basis) {
  RawConcentrations out{Plane<double>(img.width, img.height), Plane<double>(img.width, img.height)};
  const auto& m = basis.mat_rgb_to_heres_od;
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb od = od_color::pixel_to_od(img.pixel(i), basis.params.i0, basis.params.intensity_floor);
    out.h.data[i] = m[0] * od[0] + m[1] * od[1] + m[2] * od[2];
    out.e.data[i] = m[3] * od[0] + m[4] * od[1] + m[5] * od[2];
  }
  return out;
}

float normalize_value(double raw, double norm) noexcept {
  return static_cast<float>(std::clamp(raw * 0.5 / norm, 0.0, 1.0));
}

ConcentrationImage normalize_concentrations(const Plane<double>& raw, double norm, Stain stain,
                                            const std::string& slide_id) {
  if (!(norm > 0.0) || !std::isfinite(norm))
    fail(ErrorKind::kInvalidBasis, "normalization constant must be positive");
  ConcentrationImage out{Plane<float>(raw.width, raw.height), stain, slide_id};
  for (std::size_t i = 0; i < raw.size(); ++i) out.values.data[i] = normalize_value(raw.data[i], norm);
  return out;
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) fail(ErrorKind::kInvalidInput, "percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorKind::kInvalidInput, "percentile rank must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (frac == 0.0 || lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + frac * (b - a);
}

double compute_norm(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::kInvalidInput, "cannot compute a normalization constant from no values");
  if (values.size() < 100)
    fail(ErrorKind::kInvalidInput,
         "need at least 100 values for the 99th percentile, got " + std::to_string(values.size()));
  return percentile(values, 0.99);
}

Reconstruction reconstruct_rgb(const ConcentrationImage& h, const ConcentrationImage& e, const StainBasis& basis) {
  if (!h.values.same_shape(e.values)) fail(ErrorKind::kInvalidInput, "H and E maps differ in size");
  if (!(basis.norm_h > 0.0) || !(basis.norm_e > 0.0))
    fail(ErrorKind::kInvalidBasis, "basis normalization constants are unset");
  Reconstruction out{RgbImage(h.values.width, h.values.height, basis.params.i0), false};
  out.image.i0 = basis.params.i0;
  out.cross_basis = h.slide_id != basis.slide_id || e.slide_id != basis.slide_id;
  const double scale_h = basis.norm_h / 0.5;
  const double scale_e = basis.norm_e / 0.5;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const double ah = h.values.data[i] * scale_h;
    const double ae = e.values.data[i] * scale_e;
    Rgb od;
    for (int c = 0; c < 3; ++c) od[c] = std::max(0.0, ah * basis.v_h[c] + ae * basis.v_e[c]);
    const Rgb px = od_color::od_to_pixel(od, basis.params.i0);
    for (int c = 0; c < 3; ++c) out.image.pixels[3 * i + c] = px[c];
  }
  return out;
}

std::pair<ConcentrationImage, ConcentrationImage> separate_normalized(const RgbImage& img, const StainBasis& basis) {
  const RawConcentrations raw = separate_concentrations(img, basis);
  return {normalize_concentrations(raw.h, basis.norm_h, Stain::kHematoxylin, basis.slide_id),
          normalize_concentrations(raw.e, basis.norm_e, Stain::kEosin, basis.slide_id)};
}

}  // namespace hessl::separation
