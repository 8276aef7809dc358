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

#include "hessl/errors.hpp"
#include "hessl/image.hpp"

namespace hessl {

const char* kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kInsufficientTissue: return "insufficient_tissue";
    case ErrorKind::kDegenerateStain: return "degenerate_stain";
    case ErrorKind::kConditioning: return "conditioning";
    case ErrorKind::kInvalidBasis: return "invalid_basis";
    case ErrorKind::kBasisMismatch: return "basis_mismatch";
    case ErrorKind::kAnnotation: return "annotation";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kEvaluation: return "evaluation";
    case ErrorKind::kNumericFault: return "numeric_fault";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInsufficientTissue: return 2;
    case ErrorKind::kDegenerateStain: return 3;
    case ErrorKind::kBasisMismatch:
    case ErrorKind::kInvalidBasis: return 4;
    case ErrorKind::kAnnotation: return 5;
    case ErrorKind::kConfiguration: return 6;
    case ErrorKind::kNumericFault: return 7;
    case ErrorKind::kEvaluation: return 8;
    default: return 1;
  }
}

RgbImage::RgbImage(int w, int h, Rgb background) : width(w), height(h) {
  if (w < 1 || h < 1) fail(ErrorKind::kInvalidInput, "image dimensions must be positive");
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = background[0];
    pixels[i + 1] = background[1];
    pixels[i + 2] = background[2];
  }
}

RgbImage RgbImage::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > width || y + h > height)
    fail(ErrorKind::kInvalidInput, "crop rectangle outside image");
  RgbImage out(w, h);
  out.i0 = i0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < 3; ++k) out.at(c, r, k) = at(x + c, y + r, k);
  return out;
}

}  // namespace hessl
