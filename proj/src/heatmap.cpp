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

#include "hessl/heatmap.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "hessl/datapipe.hpp"
#include "hessl/trainer.hpp"

namespace hessl::heatmap {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<bool> transparent_mask(const std::vector<std::string>& classes, const std::vector<std::string>& names) {
  std::vector<bool> mask(classes.size(), false);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (names.empty()) {
      const std::string l = lower(classes[c]);
      mask[c] = l == "normal" || l == "benign";
    } else {
      mask[c] = std::find(names.begin(), names.end(), classes[c]) != names.end();
    }
  }
  return mask;
}

}  // namespace

std::array<std::uint8_t, 3> class_colour(int cls, int num_classes) {
  // HSV with s = 0.85, v = 0.95.
  const double h = 6.0 * static_cast<double>(cls) / static_cast<double>(std::max(num_classes, 1));
  const double v = 0.95, s = 0.85;
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto q = [m](double u) { return static_cast<std::uint8_t>(std::lround((u + m) * 255.0)); };
  return {q(r), q(g), q(b)};
}

Heatmap render_heatmap(const nn::DualEncoder& model, const std::vector<std::string>& classes, const RgbImage& image,
                       const stain_model::StainBasis& basis, const augment::AugmentPolicy& policy,
                       const HeatmapOptions& options) {
  const int num_classes = model.num_classes();
  if (static_cast<int>(classes.size()) != num_classes)
    fail(ErrorKind::kConfiguration, "model has " + std::to_string(num_classes) + " classes but " +
                                        std::to_string(classes.size()) + " names were given");
  if (options.tile_size < 1 || options.stride < 1) fail(ErrorKind::kConfiguration, "tile size and stride must be positive");
  if (options.tile_size > image.width || options.tile_size > image.height)
    fail(ErrorKind::kInvalidInput, "image is smaller than one tile");

  Heatmap out;
  out.width = image.width;
  out.height = image.height;
  out.rgba.assign(static_cast<std::size_t>(image.width) * image.height * 4, 0);

  std::vector<trainer::EvalSample> samples;
  std::vector<std::size_t> sample_tile;
  for (int y = 0; y + options.tile_size <= image.height; y += options.stride)
    for (int x = 0; x + options.tile_size <= image.width; x += options.stride) {
      TilePrediction t;
      t.x = x;
      t.y = y;
      const RgbImage tile = image.crop(x, y, options.tile_size, options.tile_size);
      t.foreground = datapipe::foreground_filter(tile, options.tissue_od, options.tissue_fraction, basis.params.intensity_floor);
      if (t.foreground) {
        samples.push_back(trainer::prepare_eval(tile, basis, -1, policy));
        sample_tile.push_back(out.tiles.size());
      }
      out.tiles.push_back(t);
    }
  if (samples.empty()) return out;

  const auto probs = trainer::predict(model, samples, options.batch);
  const auto nc = static_cast<std::size_t>(num_classes);
  std::vector<double> acc(static_cast<std::size_t>(image.width) * image.height * nc, 0.0);
  std::vector<int> cover(static_cast<std::size_t>(image.width) * image.height, 0);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    TilePrediction& t = out.tiles[sample_tile[s]];
    const double* p = probs.data() + s * nc;
    t.predicted = static_cast<int>(std::max_element(p, p + nc) - p);
    t.confidence = p[t.predicted];
    for (int y = t.y; y < t.y + options.tile_size; ++y)
      for (int x = t.x; x < t.x + options.tile_size; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * image.width + x;
        ++cover[i];
        for (std::size_t c = 0; c < nc; ++c) acc[i * nc + c] += p[c];
      }
  }

  const auto clear = transparent_mask(classes, options.transparent_classes);
  for (std::size_t i = 0; i < cover.size(); ++i) {
    if (cover[i] == 0) continue;
    const double* p = &acc[i * nc];
    const auto best = static_cast<std::size_t>(std::max_element(p, p + nc) - p);
    if (clear[best]) continue;
    const auto rgb = class_colour(static_cast<int>(best), num_classes);
    out.rgba[4 * i] = rgb[0];
    out.rgba[4 * i + 1] = rgb[1];
    out.rgba[4 * i + 2] = rgb[2];
    out.rgba[4 * i + 3] = static_cast<std::uint8_t>(std::lround(255.0 * p[best] / cover[i]));
  }
  return out;
}

}  // namespace hessl::heatmap
