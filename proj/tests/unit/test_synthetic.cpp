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


#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hessl/synthetic.hpp"

using namespace hessl;
using namespace hessl::synthetic;

namespace {

double angle(const stain_model::Vec3& a, const stain_model::Vec3& b) {
  return std::acos(std::min(1.0, a[0] * b[0] + a[1] * b[1] + a[2] * b[2])) * 180.0 / std::numbers::pi;
}

double mean_h(const TwoStain& t) {
  double s = 0.0;
  for (double v : t.h.data) s += v;
  return s / static_cast<double>(t.h.size());
}

}  // namespace

TEST_CASE("reference stains are unit vectors") {
  const auto s = reference_stains();
  for (const auto& v : {s.v_h, s.v_e}) CHECK(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) == doctest::Approx(1.0));
  CHECK(s.v_h[0] > s.v_e[0]);
}

TEST_CASE("perturbed stains stay close, positive and ordered") {
  Stream rng = make_stream(4, {});
  const auto base = reference_stains();
  for (int t = 0; t < 100; ++t) {
    const auto p = perturb(base, 5.0, rng);
    CHECK(angle(p.v_h, base.v_h) <= 5.0 + 1e-9);
    CHECK(angle(p.v_e, base.v_e) <= 5.0 + 1e-9);
    for (int c = 0; c < 3; ++c) CHECK((p.v_h[c] > 0 && p.v_e[c] > 0));
    CHECK(p.v_h[0] >= p.v_e[0]);
  }
}

TEST_CASE("composition follows Beer-Lambert") {
  TwoStain c{Plane<double>(2, 1), Plane<double>(2, 1)};
  c.h.data = {0.0, 0.7};
  c.e.data = {0.0, 0.2};
  const auto s = reference_stains();
  const RgbImage img = compose(c, s);
  for (int k = 0; k < 3; ++k) {
    CHECK(img.at(0, 0, k) == 255.0);
    CHECK(img.at(1, 0, k) == doctest::Approx(255.0 * std::pow(10.0, -(0.7 * s.v_h[k] + 0.2 * s.v_e[k]))));
  }
}

TEST_CASE("class textures differ in their hematoxylin statistics") {
  const auto tex = default_textures();
  REQUIRE(tex.size() == 3);
  Stream rng = make_stream(8, {});
  double sparse = 0.0, dense = 0.0;
  for (int t = 0; t < 40; ++t) {
    sparse += mean_h(texture_tile(40, tex[0], rng));
    dense += mean_h(texture_tile(40, tex[1], rng));
  }
  CHECK(dense > sparse);
}

TEST_CASE("slides are grids of class tiles with background holes") {
  Stream rng = make_stream(2, {});
  const std::vector<int> classes{0, 1, -1, 2, 0, 1};
  const auto s = make_slide("s", 2, 3, 20, classes, default_textures(), reference_stains(), rng);
  CHECK(s.image.width == 60);
  CHECK(s.image.height == 40);
  for (int y = 0; y < 20; ++y)
    for (int x = 40; x < 60; ++x) CHECK(s.image.at(x, y, 1) == 255.0);
  CHECK_THROWS_AS(make_slide("s", 2, 2, 20, classes, default_textures(), reference_stains(), rng), Error);
}

TEST_CASE("block annotations cover uniform blocks only") {
  Stream rng = make_stream(3, {});
  const std::vector<int> classes{0, 0, 1, 2, 0, 0, 1, 1};
  const auto s = make_slide("s", 2, 4, 10, classes, default_textures(), reference_stains(), rng);
  const auto a = block_annotations(s, 2, {"sparse", "dense", "spindle"}, 1.0, {});
  REQUIRE(a.polygons.size() == 1);
  CHECK(a.polygons[0].label == "sparse");
  CHECK(a.width == 40);
  CHECK_NOTHROW(datapipe::validate_polygons(a.polygons));
}
