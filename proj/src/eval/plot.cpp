// Copyright 2026 The leukmil Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "leukmil/eval/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "leukmil/core/error.hpp"
#include "leukmil/core/image_io.hpp"

namespace leukmil::eval {

void write_plot_csv(const PlotData& plot, const std::string& config_digest, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "# config_digest=" << config_digest << '\n' << "x,series,value\n";
  char buf[64];
  for (const auto& p : plot.points) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.x);
    out << buf << ',' << p.series << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", p.value);
    out << buf << '\n';
  }
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette{{
    {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {23, 190, 207}}};

void put(Raster& r, int x, int y, const std::array<std::uint8_t, 3>& c) {
  if (x < 0 || y < 0 || x >= r.width || y >= r.height) return;
  for (int k = 0; k < 3; ++k) r.at(x, y, k) = c[k];
}

void line(Raster& r, double x0, double y0, double x1, double y1, const std::array<std::uint8_t, 3>& c) {
  const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    put(r, x, y, c);
    put(r, x + 1, y, c);
    put(r, x, y + 1, c);
  }
}

}  // namespace

void render_plot_png(const PlotData& plot, const std::filesystem::path& path, int width, int height) {
  if (plot.points.empty()) throw InvariantViolation("nothing to plot");
  Raster img(width, height, 255);
  const int margin = 30;
  double x_lo = plot.points.front().x, x_hi = x_lo, y_lo = 0.0, y_hi = 1.0;
  for (const auto& p : plot.points) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.value);
    y_hi = std::max(y_hi, p.value);
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  auto px = [&](double x) { return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin); };
  auto py = [&](double y) { return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin); };
  const std::array<std::uint8_t, 3> axis{0, 0, 0}, grid{220, 220, 220};
  for (int g = 0; g <= 4; ++g) {
    const double y = py(y_lo + (y_hi - y_lo) * g / 4.0);
    line(img, margin, y, width - margin, y, grid);
  }
  line(img, margin, height - margin, width - margin, height - margin, axis);
  line(img, margin, margin, margin, height - margin, axis);

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& p : plot.points) {
    if (!series.count(p.series)) order.push_back(p.series);
    series[p.series].emplace_back(p.x, p.value);
  }
  for (std::size_t s = 0; s < order.size(); ++s) {
    auto pts = series[order[s]];
    std::stable_sort(pts.begin(), pts.end());
    const auto& colour = kPalette[s % kPalette.size()];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double x = px(pts[i].first), y = py(pts[i].second);
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) put(img, static_cast<int>(x) + dx, static_cast<int>(y) + dy, colour);
      if (i > 0) line(img, px(pts[i - 1].first), py(pts[i - 1].second), x, y, colour);
    }
    // legend swatch
    for (int dy = 0; dy < 8; ++dy)
      for (int dx = 0; dx < 16; ++dx) put(img, width - margin - 16 + dx, margin + static_cast<int>(s) * 12 + dy, colour);
  }
  write_png(img, path.string());
}

}  // namespace leukmil::eval
