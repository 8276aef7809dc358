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

#include "hessl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hessl/od_color.hpp"

namespace hessl::synthetic {

using stain_model::Vec3;
using stain_model::normalized;

StainPair reference_stains() {
  return {normalized({0.651, 0.701, 0.290}), normalized({0.092, 0.954, 0.283})};
}

namespace {

Vec3 rotate_random(const Vec3& v, double max_deg, Stream& rng) {
  for (;;) {
    // Random axis orthogonal to v, random angle.
    Vec3 a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double d = stain_model::dot(a, v);
    for (int c = 0; c < 3; ++c) a[c] -= d * v[c];
    const double n = std::sqrt(stain_model::dot(a, a));
    if (n < 1e-6) continue;
    for (double& c : a) c /= n;
    const double t = rng.uniform(-max_deg, max_deg) * std::numbers::pi / 180.0;
    Vec3 out;
    for (int c = 0; c < 3; ++c) out[c] = std::cos(t) * v[c] + std::sin(t) * a[c];
    if (out[0] > 0 && out[1] > 0 && out[2] > 0) return normalized(out);
  }
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

StainPair perturb(const StainPair& base, double max_deg, Stream& rng) {
  StainPair p{rotate_random(base.v_h, max_deg, rng), rotate_random(base.v_e, max_deg, rng)};
  if (p.v_h[0] < p.v_e[0]) std::swap(p.v_h, p.v_e);
  return p;
}

RgbImage compose(const TwoStain& c, const StainPair& stains, Rgb i0) {
  if (!c.h.same_shape(c.e)) fail(ErrorKind::kInvalidInput, "concentration maps differ in size");
  RgbImage img(c.h.width, c.h.height, i0);
  img.i0 = i0;
  for (std::size_t i = 0; i < c.h.size(); ++i) {
    Rgb od;
    for (int k = 0; k < 3; ++k) od[k] = c.h.data[i] * stains.v_h[k] + c.e.data[i] * stains.v_e[k];
    const Rgb px = od_color::od_to_pixel(od, i0);
    for (int k = 0; k < 3; ++k) img.pixels[3 * i + k] = px[k];
  }
  return img;
}

TwoStain uniform_concentrations(int width, int height, double max_h, double max_e, Stream& rng) {
  TwoStain t{Plane<double>(width, height), Plane<double>(width, height)};
  for (std::size_t i = 0; i < t.h.size(); ++i) {
    t.h.data[i] = rng.uniform(0.0, max_h);
    t.e.data[i] = rng.uniform(0.0, max_e);
  }
  return t;
}

std::vector<ClassTexture> default_textures() {
  ClassTexture sparse;
  sparse.density = 0.010;
  ClassTexture dense;
  dense.density = 0.020;
  dense.major_min = dense.minor_min = 1.3;
  dense.major_max = dense.minor_max = 2.2;
  ClassTexture spindle;
  spindle.density = 0.013;
  spindle.major_min = 2.8;
  spindle.major_max = 4.0;
  spindle.minor_min = 0.9;
  spindle.minor_max = 1.4;
  spindle.e_base = 0.42;
  return {sparse, dense, spindle};
}

TwoStain texture_tile(int size, const ClassTexture& tex, Stream& rng) {
  TwoStain t{Plane<double>(size, size), Plane<double>(size, size)};
  // Stroma: eosin with a few low-frequency waves plus a faint hematoxylin haze.
  const int waves = 3;
  double fx[waves], fy[waves], ph[waves], amp[waves];
  for (int k = 0; k < waves; ++k) {
    const double ang = rng.uniform(0.0, std::numbers::pi);
    const double freq = rng.uniform(0.05, 0.25);
    fx[k] = freq * std::cos(ang);
    fy[k] = freq * std::sin(ang);
    ph[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    amp[k] = rng.uniform(0.03, 0.08);
  }
  const double e_level = tex.e_base * rng.uniform(0.85, 1.15);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double e = e_level;
      for (int k = 0; k < waves; ++k) e += amp[k] * std::sin(fx[k] * x + fy[k] * y + ph[k]);
      t.e.at(x, y) = std::max(0.02, e + rng.uniform(-0.03, 0.03));
      t.h.at(x, y) = rng.uniform(0.02, 0.08);
    }

  // Nuclei: Poisson count via exponential gaps, ellipses with soft edges.
  const double density_scale = std::exp(rng.uniform(-tex.density_spread, tex.density_spread));
  const double size_scale = std::exp(rng.uniform(-tex.size_spread, tex.size_spread));
  const double expected = tex.density * density_scale * size * size;
  int count = 0;
  for (double acc = -std::log(1.0 - rng.uniform()); acc < expected; acc += -std::log(1.0 - rng.uniform())) ++count;
  for (int n = 0; n < count; ++n) {
    const double cx = rng.uniform(-2.0, size + 2.0);
    const double cy = rng.uniform(-2.0, size + 2.0);
    const double a = size_scale * rng.uniform(tex.major_min, tex.major_max);
    const double b = size_scale * rng.uniform(tex.minor_min, tex.minor_max);
    const double th = rng.uniform(0.0, std::numbers::pi);
    const double level = rng.uniform(tex.h_min, tex.h_max);
    const double ct = std::cos(th), st = std::sin(th);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - a - 1)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + a + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - a - 1)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + a + 1)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (ct * dx + st * dy) / a;
        const double v = (-st * dx + ct * dy) / b;
        const double r = std::sqrt(u * u + v * v);
        const double w = 1.0 - smoothstep(0.7, 1.15, r);
        if (w <= 0.0) continue;
        t.h.at(x, y) = std::max(t.h.at(x, y), level * w);
        t.e.at(x, y) *= 1.0 - 0.6 * w;
      }
  }
  return t;
}

SyntheticSlide make_slide(const std::string& slide_id, int rows, int cols, int tile_size,
                          const std::vector<int>& tile_classes, const std::vector<ClassTexture>& textures,
                          const StainPair& stains, Stream& rng) {
  if (tile_classes.size() != static_cast<std::size_t>(rows) * cols)
    fail(ErrorKind::kInvalidInput, "need one class per tile");
  SyntheticSlide s;
  s.slide_id = slide_id;
  s.stains = stains;
  s.tile_size = tile_size;
  s.rows = rows;
  s.cols = cols;
  s.tile_classes = tile_classes;
  s.truth = {Plane<double>(cols * tile_size, rows * tile_size), Plane<double>(cols * tile_size, rows * tile_size)};
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int cls = tile_classes[static_cast<std::size_t>(r * cols + c)];
      if (cls < 0) continue;  // background
      const TwoStain t = texture_tile(tile_size, textures.at(static_cast<std::size_t>(cls)), rng);
      for (int y = 0; y < tile_size; ++y)
        for (int x = 0; x < tile_size; ++x) {
          s.truth.h.at(c * tile_size + x, r * tile_size + y) = t.h.at(x, y);
          s.truth.e.at(c * tile_size + x, r * tile_size + y) = t.e.at(x, y);
        }
    }
  s.image = compose(s.truth, stains);
  return s;
}

datapipe::AnnotationFile block_annotations(const SyntheticSlide& slide, int block,
                                           const std::vector<std::string>& class_names, double inset,
                                           const std::vector<int>& skip) {
  datapipe::AnnotationFile a;
  a.slide_id = slide.slide_id;
  a.width = slide.image.width;
  a.height = slide.image.height;
  const int brows = slide.rows / block;
  const int bcols = slide.cols / block;
  for (int br = 0; br < brows; ++br)
    for (int bc = 0; bc < bcols; ++bc) {
      const int id = br * bcols + bc;
      if (std::find(skip.begin(), skip.end(), id) != skip.end()) continue;
      const int cls = slide.tile_classes[static_cast<std::size_t>(br * block * slide.cols + bc * block)];
      bool uniform = cls >= 0;
      for (int r = 0; r < block && uniform; ++r)
        for (int c = 0; c < block; ++c)
          uniform = uniform && slide.tile_classes[static_cast<std::size_t>((br * block + r) * slide.cols + bc * block + c)] == cls;
      if (!uniform) continue;
      const double x0 = bc * block * slide.tile_size - inset;
      const double y0 = br * block * slide.tile_size - inset;
      const double x1 = (bc + 1) * block * slide.tile_size + inset;
      const double y1 = (br + 1) * block * slide.tile_size + inset;
      a.polygons.push_back({class_names.at(static_cast<std::size_t>(cls)), {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}});
    }
  return a;
}

}  // namespace hessl::synthetic
