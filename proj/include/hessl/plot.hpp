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

#ifndef HESSL_PLOT_HPP
#define HESSL_PLOT_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hessl::plot {

using Series = std::pair<std::string, std::vector<double>>;

/// One stacked panel per series, each auto-scaled to its own range, drawn
/// as an RGBA raster (width x panel_height * series count).
std::vector<std::uint8_t> render_panels(const std::vector<Series>& series, int width, int panel_height);

void write_line_plot(const std::string& path, const std::vector<Series>& series, int width = 640, int panel_height = 160);

}  // namespace hessl::plot

#endif  // HESSL_PLOT_HPP
