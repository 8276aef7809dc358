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

#ifndef HESSL_IMAGE_IO_HPP
#define HESSL_IMAGE_IO_HPP

#include <cstdint>
#include <span>
#include <string>

#include "hessl/image.hpp"

namespace hessl::io {

/// PNG or TIFF, 8- or 16-bit, grey/RGB with optional alpha (dropped).
/// Intensities are rescaled so the file's white point maps to 255.
RgbImage read_image(const std::string& path);

void write_png_rgb8(const std::string& path, const RgbImage& img);
/// Values in [0, 1] quantised to 16-bit grey.
void write_png_gray16(const std::string& path, const Plane<float>& plane);
void write_png_rgba8(const std::string& path, int width, int height, std::span<const std::uint8_t> rgba);
/// 8-bit RGB TIFF, used by tests of the TIFF reader.
void write_tiff_rgb(const std::string& path, const RgbImage& img, int bits_per_sample);

Plane<std::uint16_t> read_png_gray16(const std::string& path);
/// Raw decoded samples of any PNG (for bit-exact comparisons).
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};
DecodedPng decode_png(const std::string& path);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace hessl::io

#endif  // HESSL_IMAGE_IO_HPP
