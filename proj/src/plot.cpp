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

#include "hessl/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "hessl/image_io.hpp"

namespace hessl::plot {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette{{
    {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}, {23, 190, 207}}};

struct Canvas {
  int w, h;
  std::vector<std::uint8_t> px;
  void set(int x, int y, const std::array<std::uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    auto* p = &px[(static_cast<std::size_t>(y) * w + x) * 4];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
    p[3] = 255;
  }
  void line(int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

}  // namespace

std::vector<std::uint8_t> render_panels(const std::vector<Series>& series, int width, int panel_height) {
  const int panels = std::max<int>(1, static_cast<int>(series.size()));
  Canvas cv{width, panel_height * panels, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * panel_height * panels * 4, 255)};
  constexpr int kMargin = 8;
  const std::array<std::uint8_t, 3> frame{160, 160, 160};
  for (int p = 0; p < panels; ++p) {
    const int top = p * panel_height + kMargin;
    const int bottom = (p + 1) * panel_height - kMargin;
    const int left = kMargin, right = width - kMargin;
    cv.line(left, top, right, top, frame);
    cv.line(left, bottom, right, bottom, frame);
    cv.line(left, top, left, bottom, frame);
    cv.line(right, top, right, bottom, frame);
    if (p >= static_cast<int>(series.size())) continue;
    const auto& ys = series[static_cast<std::size_t>(p)].second;
    std::vector<double> finite;
    for (double y : ys)
      if (std::isfinite(y)) finite.push_back(y);
    if (finite.empty()) continue;
    const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const auto& colour = kPalette[static_cast<std::size_t>(p) % kPalette.size()];
    auto to_x = [&](std::size_t i) {
      const double t = ys.size() > 1 ? static_cast<double>(i) / static_cast<double>(ys.size() - 1) : 0.5;
      return left + 1 + static_cast<int>(std::lround(t * (right - left - 2)));
    };
    auto to_y = [&](double y) { return bottom - 1 - static_cast<int>(std::lround((y - lo) / (hi - lo) * (bottom - top - 2))); };
    int px = -1, py = -1;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (!std::isfinite(ys[i])) {
        px = -1;
        continue;
      }
      const int x = to_x(i), y = to_y(ys[i]);
      if (px >= 0) cv.line(px, py, x, y, colour);
      else cv.set(x, y, colour);
      px = x;
      py = y;
    }
  }
  return cv.px;
}

void write_line_plot(const std::string& path, const std::vector<Series>& series, int width, int panel_height) {
  const auto px = render_panels(series, width, panel_height);
  const int panels = std::max<int>(1, static_cast<int>(series.size()));
  io::write_png_rgba8(path, width, panel_height * panels, px);
}

}  // namespace hessl::plot
