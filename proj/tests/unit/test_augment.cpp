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


#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "hessl/augment.hpp"

using hessl::Plane;
using hessl::RgbImage;
using hessl::Stream;
using namespace hessl::augment;
using hessl::separation::ConcentrationImage;
using hessl::separation::Stain;

namespace {

ConcentrationImage ramp(int size, Stain s, float scale) {
  ConcentrationImage c{Plane<float>(size, size), s, "t"};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) c.values.at(x, y) = scale * static_cast<float>(x + size * y) / static_cast<float>(size * size);
  return c;
}

}  // namespace

TEST_CASE("zero jitter leaves the RGB tile unchanged") {
  RgbImage img(5, 4);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>(i * 7 % 250);
  AugmentPolicy p = AugmentPolicy::identity(4);
  Stream rng = hessl::make_stream(1, {});
  CHECK(jitter_rgb(img, p, rng) == img);
}

TEST_CASE("brightness is multiplicative") {
  RgbImage img(3, 3, {100, 100, 100});
  const RgbImage out = adjust_brightness(img, 1.2);
  for (double v : out.pixels) CHECK(v == doctest::Approx(120.0));
}

TEST_CASE("zero saturation gives the luma grey") {
  RgbImage img(1, 1, {200, 100, 50});
  const RgbImage out = adjust_saturation(img, 0.0);
  const double luma = 0.299 * 200 + 0.587 * 100 + 0.114 * 50;
  for (double v : out.pixels) CHECK(v == doctest::Approx(luma));
}

TEST_CASE("identity policy returns the input pair") {
  const auto h = ramp(16, Stain::kHematoxylin, 1.0f);
  const auto e = ramp(16, Stain::kEosin, 0.5f);
  const auto out = augment_he_pair(h, e, AugmentPolicy::identity(16), hessl::make_stream(3, {}));
  CHECK(out.h.values == h.values);
  CHECK(out.e.values == e.values);
  CHECK(out.h.stain == Stain::kHematoxylin);
  CHECK(out.e.slide_id == "t");
}

TEST_CASE("same seed gives identical augmentation and draw log") {
  AugmentPolicy p;
  p.crop_size = 24;
  p.rotation = Rotation::kContinuous;
  const auto h = ramp(32, Stain::kHematoxylin, 1.0f);
  const auto e = ramp(32, Stain::kEosin, 0.7f);
  const auto a = augment_he_pair(h, e, p, hessl::make_stream(5, {9}));
  const auto b = augment_he_pair(h, e, p, hessl::make_stream(5, {9}));
  CHECK(a.h.values == b.h.values);
  CHECK(a.e.values == b.e.values);
  CHECK(a.draw_log == b.draw_log);
  CHECK(draw_log_jsonl(a.draw_log) == draw_log_jsonl(b.draw_log));
  const auto c = augment_he_pair(h, e, p, hessl::make_stream(6, {9}));
  CHECK_FALSE(c.draw_log == a.draw_log);
}

TEST_CASE("H and E draw independent parameters") {
  AugmentPolicy p;
  p.crop_size = 8;
  const auto h = ramp(40, Stain::kHematoxylin, 1.0f);
  int differing = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto out = augment_he_pair(h, h, p, hessl::make_stream(s, {}));
    double bh = 0, be = 0;
    for (const auto& d : out.draw_log)
      if (d.op == "brightness") (d.channel == "h" ? bh : be) = d.value;
    differing += bh != be;
  }
  CHECK(differing == 20);
}

TEST_CASE("crop offsets cover exactly the admissible range") {
  AugmentPolicy p = AugmentPolicy::identity(256);
  const auto h = ramp(400, Stain::kHematoxylin, 1.0f);
  int lo = 1000, hi = -1;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const auto out = augment_he_pair(h, h, p, hessl::make_stream(s, {}));
    for (const auto& d : out.draw_log)
      if (d.op == "crop_x" || d.op == "crop_y") {
        lo = std::min(lo, static_cast<int>(d.value));
        hi = std::max(hi, static_cast<int>(d.value));
        CHECK(d.value == std::floor(d.value));
      }
  }
  CHECK(lo == 0);
  CHECK(hi == 144);
}

TEST_CASE("operation order is rotate, crop, flip, brightness") {
  AugmentPolicy p;
  p.crop_size = 8;
  const auto h = ramp(12, Stain::kHematoxylin, 1.0f);
  const auto out = augment_he_pair(h, h, p, hessl::make_stream(2, {}));
  std::vector<std::string> ops;
  for (const auto& d : out.draw_log)
    if (d.channel == "h") ops.push_back(d.op);
  CHECK(ops == std::vector<std::string>{"rotate90", "crop_x", "crop_y", "flip_h", "flip_v", "brightness"});
}

TEST_CASE("augmented values stay in the unit interval") {
  AugmentPolicy p;
  p.crop_size = 20;
  p.he_brightness_jitter = 0.5;
  const auto h = ramp(24, Stain::kHematoxylin, 1.0f);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto out = augment_he_pair(h, h, p, hessl::make_stream(s, {}));
    for (float v : out.h.values.data) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("tile smaller than the crop is rejected") {
  AugmentPolicy p;
  p.crop_size = 32;
  const auto h = ramp(16, Stain::kHematoxylin, 1.0f);
  CHECK_THROWS_AS(augment_he_pair(h, h, p, hessl::make_stream(1, {})), hessl::Error);
}

TEST_CASE("four quarter turns and two flips are the identity") {
  Plane<float> p(5, 3);
  for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = static_cast<float>(i);
  CHECK(rotate90(rotate90(rotate90(rotate90(p, 1), 1), 1), 1) == p);
  CHECK(rotate90(p, 1).width == 3);
  CHECK(rotate90(p, 1).at(2, 0) == p.at(0, 0));  // clockwise: top-left goes to top-right
  CHECK(flip(flip(p, true), true) == p);
  CHECK(flip(p, false).at(0, 0) == p.at(0, 2));
  Plane<float> unit_range = p;
  for (float& v : unit_range.data) v /= 16.0f;
  CHECK(rotate_continuous(unit_range, 0.0) == unit_range);
  CHECK(center_crop(p, 3).at(0, 0) == p.at(1, 0));
}
