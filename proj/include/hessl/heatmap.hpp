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

#ifndef HESSL_HEATMAP_HPP
#define HESSL_HEATMAP_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hessl/augment.hpp"
#include "hessl/dual_encoder.hpp"
#include "hessl/image.hpp"
#include "hessl/stain_model.hpp"

namespace hessl::heatmap {

struct HeatmapOptions {
  int tile_size = 400;
  int stride = 200;
  double tissue_od = 0.15;
  double tissue_fraction = 0.25;
  /// Predictions of these classes are left transparent. Empty means the
  /// classes named "normal" or "benign" (case-insensitive).
  std::vector<std::string> transparent_classes;
  int batch = 64;
};

struct TilePrediction {
  int x = 0;
  int y = 0;
  bool foreground = false;
  int predicted = -1;
  double confidence = 0.0;
};

struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;  // row-major, 4 bytes per pixel
  std::vector<TilePrediction> tiles;
};

/// Evenly spaced hues, one per class.
std::array<std::uint8_t, 3> class_colour(int cls, int num_classes);

/// Slides a tile window over the image, classifies every foreground tile and
/// paints each pixel with the class of the averaged probabilities of the
/// foreground tiles covering it; opacity is the top probability.
Heatmap render_heatmap(const nn::DualEncoder& model, const std::vector<std::string>& classes, const RgbImage& image,
                       const stain_model::StainBasis& basis, const augment::AugmentPolicy& policy,
                       const HeatmapOptions& options);

}  // namespace hessl::heatmap

#endif  // HESSL_HEATMAP_HPP
