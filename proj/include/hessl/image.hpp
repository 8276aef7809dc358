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

#ifndef HESSL_IMAGE_HPP
#define HESSL_IMAGE_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "hessl/errors.hpp"

namespace hessl {

/// Single-channel raster, row-major.
template <typename T>
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int w, int h, T fill = T{}) : width(w), height(h) {
    if (w < 1 || h < 1) fail(ErrorKind::kInvalidInput, "plane dimensions must be positive");
    data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }

  std::size_t size() const noexcept { return data.size(); }
  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Plane& o) const noexcept { return width == o.width && height == o.height; }
  bool operator==(const Plane&) const = default;
};

using Rgb = std::array<double, 3>;

/// Interleaved RGB intensities in [0, i0[c]], kept in double precision.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  Rgb i0{255.0, 255.0, 255.0};

  RgbImage() = default;
  RgbImage(int w, int h, Rgb background = {255.0, 255.0, 255.0});

  std::size_t pixel_count() const noexcept { return pixels.size() / 3; }
  double& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  Rgb pixel(std::size_t i) const { return {pixels[3 * i], pixels[3 * i + 1], pixels[3 * i + 2]}; }

  /// Copy of the rectangle [x, x+w) x [y, y+h). Throws if it leaves the image.
  RgbImage crop(int x, int y, int w, int h) const;
  bool operator==(const RgbImage&) const = default;
};

/// Interleaved optical densities; every value finite and >= 0.
struct OdImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  std::size_t pixel_count() const noexcept { return pixels.size() / 3; }
  Rgb pixel(std::size_t i) const { return {pixels[3 * i], pixels[3 * i + 1], pixels[3 * i + 2]}; }
};

}  // namespace hessl

#endif  // HESSL_IMAGE_HPP
