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

#ifndef HESSL_OD_COLOR_HPP
#define HESSL_OD_COLOR_HPP

#include "hessl/image.hpp"

namespace hessl::od_color {

inline constexpr double kDefaultIntensityFloor = 1.0;

/// Beer-Lambert optical density, OD_c = log10(I0_c / max(I_c, floor)).
/// Intensities above I0 or a non-positive I0/floor raise kInvalidInput.
OdImage rgb_to_od(const RgbImage& img, double intensity_floor = kDefaultIntensityFloor);

/// Inverse transform, I_c = I0_c * 10^(-OD_c).
RgbImage od_to_rgb(const OdImage& od, const Rgb& i0);

/// Per-pixel forms used by the separation code.
Rgb pixel_to_od(const Rgb& intensity, const Rgb& i0, double intensity_floor);
Rgb od_to_pixel(const Rgb& od, const Rgb& i0);

double od_norm(const Rgb& od);

}  // namespace hessl::od_color

#endif  // HESSL_OD_COLOR_HPP
