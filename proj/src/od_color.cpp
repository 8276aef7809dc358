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

#include "hessl/od_color.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hessl::od_color {

namespace {

void check_i0(const Rgb& i0) {
  for (double v : i0)
    if (!(v > 0.0) || !std::isfinite(v))
      fail(ErrorKind::kInvalidInput, "background intensity I0 must be positive, got " + std::to_string(v));
}

}  // namespace

Rgb pixel_to_od(const Rgb& intensity, const Rgb& i0, double intensity_floor) {
  Rgb od{};
  for (int c = 0; c < 3; ++c) {
    const double v = intensity[c];
    if (v > i0[c] || !(v >= 0.0))
      fail(ErrorKind::kInvalidInput, "intensity " + std::to_string(v) + " outside [0, I0]");
    od[c] = std::log10(i0[c] / std::max(v, intensity_floor));
    if (od[c] < 0.0) od[c] = 0.0;  // only when floor > I0
  }
  return od;
}

Rgb od_to_pixel(const Rgb& od, const Rgb& i0) {
  return {i0[0] * std::pow(10.0, -od[0]), i0[1] * std::pow(10.0, -od[1]), i0[2] * std::pow(10.0, -od[2])};
}

double od_norm(const Rgb& od) { return std::sqrt(od[0] * od[0] + od[1] * od[1] + od[2] * od[2]); }

OdImage rgb_to_od(const RgbImage& img, double intensity_floor) {
  check_i0(img.i0);
  if (!(intensity_floor > 0.0)) fail(ErrorKind::kInvalidInput, "intensity floor must be positive");
  OdImage od;
  od.width = img.width;
  od.height = img.height;
  od.pixels.resize(img.pixels.size());
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb v = pixel_to_od(img.pixel(i), img.i0, intensity_floor);
    od.pixels[3 * i] = v[0];
    od.pixels[3 * i + 1] = v[1];
    od.pixels[3 * i + 2] = v[2];
  }
  return od;
}

RgbImage od_to_rgb(const OdImage& od, const Rgb& i0) {
  check_i0(i0);
  RgbImage img(od.width, od.height);
  img.i0 = i0;
  const std::size_t n = od.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb p = od.pixel(i);
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]) || p[0] < 0 || p[1] < 0 || p[2] < 0)
      fail(ErrorKind::kInvalidInput, "optical density must be finite and non-negative");
    const Rgb v = od_to_pixel(p, i0);
    img.pixels[3 * i] = v[0];
    img.pixels[3 * i + 1] = v[1];
    img.pixels[3 * i + 2] = v[2];
  }
  return img;
}

}  // namespace hessl::od_color
