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

#ifndef HESSL_SYNTHETIC_HPP
#define HESSL_SYNTHETIC_HPP

#include <string>
#include <vector>

#include "hessl/datapipe.hpp"
#include "hessl/image.hpp"
#include "hessl/rng.hpp"
#include "hessl/stain_model.hpp"

namespace hessl::synthetic {

struct StainPair {
  stain_model::Vec3 v_h{};
  stain_model::Vec3 v_e{};
};

/// H = (0.651, 0.701, 0.290), E = (0.092, 0.954, 0.283), unit-normalised.
StainPair reference_stains();
/// Rotate each vector by up to max_deg about a random axis, keeping all
/// components positive.
StainPair perturb(const StainPair& base, double max_deg, Stream& rng);

struct TwoStain {
  Plane<double> h;
  Plane<double> e;
};

/// Noise-free Beer-Lambert composition: OD = h * v_h + e * v_e.
RgbImage compose(const TwoStain& c, const StainPair& stains, Rgb i0 = {255.0, 255.0, 255.0});

/// Independent uniform concentrations in [0, max_h] x [0, max_e].
TwoStain uniform_concentrations(int width, int height, double max_h, double max_e, Stream& rng);

/// Per-class nucleus statistics for procedural tissue texture.
struct ClassTexture {
  double density = 0.01;   // nuclei per pixel
  double major_min = 1.5;  // ellipse semi-axes, pixels
  double major_max = 2.5;
  double minor_min = 1.5;
  double minor_max = 2.5;
  double h_min = 0.5;  // nuclear hematoxylin concentration
  double h_max = 0.9;
  double e_base = 0.35;  // stroma eosin level
  /// Per-tile nuisance: density and nucleus size are scaled by
  /// exp(U(-spread, spread)), shared by all nuclei of the tile.
  double density_spread = 0.0;
  double size_spread = 0.0;
};

/// Three classes: sparse round nuclei, dense round nuclei, spindle-shaped
/// nuclei at intermediate density.
std::vector<ClassTexture> default_textures();

TwoStain texture_tile(int size, const ClassTexture& tex, Stream& rng);

/// A slide assembled from a rows x cols grid of texture tiles.
struct SyntheticSlide {
  std::string slide_id;
  RgbImage image;
  StainPair stains;
  TwoStain truth;
  int tile_size = 0;
  int rows = 0;
  int cols = 0;
  std::vector<int> tile_classes;  // row-major
};

SyntheticSlide make_slide(const std::string& slide_id, int rows, int cols, int tile_size,
                          const std::vector<int>& tile_classes, const std::vector<ClassTexture>& textures,
                          const StainPair& stains, Stream& rng);

/// Rectangular polygon annotations over every block of block x block tiles
/// whose tiles share a class, inset by `inset` pixels. Blocks listed in
/// `skip` stay unannotated.
datapipe::AnnotationFile block_annotations(const SyntheticSlide& slide, int block,
                                           const std::vector<std::string>& class_names, double inset,
                                           const std::vector<int>& skip = {});

}  // namespace hessl::synthetic

#endif  // HESSL_SYNTHETIC_HPP
