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

#include "hessl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace hessl::augment {

namespace {

constexpr double kLuma[3] = {0.299, 0.587, 0.114};

double luma(const RgbImage& img, std::size_t i) {
  return kLuma[0] * img.pixels[3 * i] + kLuma[1] * img.pixels[3 * i + 1] + kLuma[2] * img.pixels[3 * i + 2];
}

void clamp_to_range(RgbImage& img) {
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = std::clamp(img.pixels[i], 0.0, img.i0[i % 3]);
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void record(DrawLog* log, const char* channel, const char* op, double value) {
  if (log) log->push_back({channel, op, value});
}

separation::ConcentrationImage augment_one(const separation::ConcentrationImage& src, const AugmentPolicy& policy,
                                           Stream rng, const char* channel, DrawLog& log) {
  Plane<float> p = src.values;
  switch (policy.rotation) {
    case Rotation::kNone:
      break;
    case Rotation::kRightAngle: {
      const int k = static_cast<int>(rng.below(4));
      record(&log, channel, "rotate90", k);
      p = rotate90(p, k);
      break;
    }
    case Rotation::kContinuous: {
      const double deg = rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg);
      record(&log, channel, "rotate_deg", deg);
      p = rotate_continuous(p, deg);
      break;
    }
  }
  const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.width - policy.crop_size + 1)));
  const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.height - policy.crop_size + 1)));
  record(&log, channel, "crop_x", x);
  record(&log, channel, "crop_y", y);
  p = crop(p, x, y, policy.crop_size);
  if (policy.flip_horizontal) {
    const bool f = rng.bernoulli(0.5);
    record(&log, channel, "flip_h", f);
    if (f) p = flip(p, true);
  }
  if (policy.flip_vertical) {
    const bool f = rng.bernoulli(0.5);
    record(&log, channel, "flip_v", f);
    if (f) p = flip(p, false);
  }
  const double j = policy.he_brightness_jitter;
  const double u = rng.uniform(1.0 - j, 1.0 + j);
  record(&log, channel, "brightness", u);
  if (u != 1.0)
    for (float& v : p.data) v = std::clamp(static_cast<float>(v * u), 0.0f, 1.0f);
  return {std::move(p), src.stain, src.slide_id};
}

}  // namespace

void AugmentPolicy::validate(int tile_width, int tile_height) const {
  for (double j : {rgb_brightness_jitter, rgb_contrast_jitter, rgb_saturation_jitter, he_brightness_jitter})
    if (!(j >= 0.0 && j < 1.0)) fail(ErrorKind::kInvalidInput, "jitter magnitudes must lie in [0, 1)");
  if (crop_size < 1) fail(ErrorKind::kInvalidInput, "crop size must be positive");
  const int limit = rotation == Rotation::kRightAngle ? std::min(tile_width, tile_height) : 0;
  if (crop_size > tile_width || crop_size > tile_height || (limit && crop_size > limit))
    fail(ErrorKind::kInvalidInput, "tile " + std::to_string(tile_width) + "x" + std::to_string(tile_height) +
                                       " is smaller than crop size " + std::to_string(crop_size));
}

AugmentPolicy AugmentPolicy::identity(int crop_size) {
  AugmentPolicy p;
  p.rgb_brightness_jitter = p.rgb_contrast_jitter = p.rgb_saturation_jitter = 0.0;
  p.he_brightness_jitter = 0.0;
  p.rotation = Rotation::kNone;
  p.flip_horizontal = p.flip_vertical = false;
  p.crop_size = crop_size;
  return p;
}

RgbImage adjust_brightness(const RgbImage& img, double factor) {
  RgbImage out = img;
  for (double& v : out.pixels) v *= factor;
  clamp_to_range(out);
  return out;
}

RgbImage adjust_contrast(const RgbImage& img, double factor) {
  RgbImage out = img;
  double mean = 0.0;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) mean += luma(img, i);
  mean /= static_cast<double>(img.pixel_count());
  for (double& v : out.pixels) v = mean + factor * (v - mean);
  clamp_to_range(out);
  return out;
}

RgbImage adjust_saturation(const RgbImage& img, double factor) {
  RgbImage out = img;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double l = luma(img, i);
    for (int c = 0; c < 3; ++c) out.pixels[3 * i + c] = l + factor * (img.pixels[3 * i + c] - l);
  }
  clamp_to_range(out);
  return out;
}

RgbImage jitter_rgb(const RgbImage& img, const AugmentPolicy& policy, Stream& rng, DrawLog* log) {
  const double b = rng.uniform(1.0 - policy.rgb_brightness_jitter, 1.0 + policy.rgb_brightness_jitter);
  const double c = rng.uniform(1.0 - policy.rgb_contrast_jitter, 1.0 + policy.rgb_contrast_jitter);
  const double s = rng.uniform(1.0 - policy.rgb_saturation_jitter, 1.0 + policy.rgb_saturation_jitter);
  record(log, "rgb", "brightness", b);
  record(log, "rgb", "contrast", c);
  record(log, "rgb", "saturation", s);
  RgbImage out = img;
  if (b != 1.0) out = adjust_brightness(out, b);
  if (c != 1.0) out = adjust_contrast(out, c);
  if (s != 1.0) out = adjust_saturation(out, s);
  return out;
}

AugmentedPair augment_he_pair(const separation::ConcentrationImage& h_full,
                              const separation::ConcentrationImage& e_full, const AugmentPolicy& policy,
                              const Stream& rng) {
  if (!h_full.values.same_shape(e_full.values)) fail(ErrorKind::kInvalidInput, "H and E tiles differ in size");
  policy.validate(h_full.values.width, h_full.values.height);
  AugmentedPair out;
  out.h = augment_one(h_full, policy, rng.child({0}), "h", out.draw_log);
  out.e = augment_one(e_full, policy, rng.child({1}), "e", out.draw_log);
  return out;
}

Plane<float> rotate90(const Plane<float>& p, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return p;
  const bool swap = k % 2 == 1;
  Plane<float> out(swap ? p.height : p.width, swap ? p.width : p.height);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      int nx, ny;
      switch (k) {
        case 1: nx = p.height - 1 - y; ny = x; break;  // clockwise
        case 2: nx = p.width - 1 - x; ny = p.height - 1 - y; break;
        default: nx = y; ny = p.width - 1 - x; break;
      }
      out.at(nx, ny) = p.at(x, y);
    }
  return out;
}

Plane<float> rotate_continuous(const Plane<float>& p, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cx = 0.5 * (p.width - 1);
  const double cy = 0.5 * (p.height - 1);
  Plane<float> out(p.width, p.height);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      auto s = [&](int xx, int yy) { return static_cast<double>(p.at(reflect(xx, p.width), reflect(yy, p.height))); };
      const double v = (1 - fy) * ((1 - fx) * s(x0, y0) + fx * s(x0 + 1, y0)) +
                       fy * ((1 - fx) * s(x0, y0 + 1) + fx * s(x0 + 1, y0 + 1));
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return out;
}

Plane<float> crop(const Plane<float>& p, int x, int y, int size) {
  if (x < 0 || y < 0 || size < 1 || x + size > p.width || y + size > p.height)
    fail(ErrorKind::kInvalidInput, "crop window outside plane");
  Plane<float> out(size, size);
  for (int r = 0; r < size; ++r)
    std::copy_n(&p.at(x, y + r), size, &out.at(0, r));
  return out;
}

Plane<float> center_crop(const Plane<float>& p, int size) {
  if (size > p.width || size > p.height) fail(ErrorKind::kInvalidInput, "centre crop larger than plane");
  return crop(p, (p.width - size) / 2, (p.height - size) / 2, size);
}

Plane<float> flip(const Plane<float>& p, bool horizontal) {
  Plane<float> out(p.width, p.height);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x)
      out.at(x, y) = horizontal ? p.at(p.width - 1 - x, y) : p.at(x, p.height - 1 - y);
  return out;
}

std::string draw_log_jsonl(const DrawLog& log) {
  std::string s;
  for (const Draw& d : log) {
    nlohmann::ordered_json j;
    j["channel"] = d.channel;
    j["op"] = d.op;
    j["value"] = d.value;
    s += j.dump() + "\n";
  }
  return s;
}

}  // namespace hessl::augment
