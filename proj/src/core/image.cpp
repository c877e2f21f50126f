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

#include "leukmil/core/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "leukmil/core/error.hpp"

namespace leukmil {

Raster::Raster(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

bool Raster::all_zero() const {
  return std::all_of(data.begin(), data.end(), [](std::uint8_t v) { return v == 0; });
}

void sample_bilinear(const Raster& src, double x, double y, std::span<double, 3> out) {
  x = std::clamp(x, 0.0, static_cast<double>(src.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(src.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, src.width - 1);
  const int y1 = std::min(y0 + 1, src.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  for (int c = 0; c < 3; ++c) {
    const double top = src.at(x0, y0, c) * (1 - fx) + src.at(x1, y0, c) * fx;
    const double bottom = src.at(x0, y1, c) * (1 - fx) + src.at(x1, y1, c) * fx;
    out[c] = top * (1 - fy) + bottom * fy;
  }
}

namespace {

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Raster crop_resize_pad(const Raster& src, int x0, int y0, int x1, int y1, int out_size) {
  x0 = std::clamp(x0, 0, src.width);
  x1 = std::clamp(x1, 0, src.width);
  y0 = std::clamp(y0, 0, src.height);
  y1 = std::clamp(y1, 0, src.height);
  const int w = x1 - x0;
  const int h = y1 - y0;
  if (w <= 0 || h <= 0) throw InvariantViolation("degenerate crop region after clipping");

  Raster out(out_size, out_size, 0);
  if (w == out_size && h == out_size) {
    for (int y = 0; y < h; ++y) {
      std::copy_n(&src.data[(static_cast<std::size_t>(y0 + y) * src.width + x0) * 3],
                  static_cast<std::size_t>(w) * 3, &out.data[static_cast<std::size_t>(y) * out_size * 3]);
    }
    return out;
  }

  const double scale = static_cast<double>(out_size) / std::max(w, h);
  const int dw = std::clamp(static_cast<int>(std::lround(w * scale)), 1, out_size);
  const int dh = std::clamp(static_cast<int>(std::lround(h * scale)), 1, out_size);
  const int ox = (out_size - dw) / 2;
  const int oy = (out_size - dh) / 2;
  std::array<double, 3> px{};
  for (int y = 0; y < dh; ++y) {
    const double sy = y0 + (y + 0.5) * (static_cast<double>(h) / dh) - 0.5;
    for (int x = 0; x < dw; ++x) {
      const double sx = x0 + (x + 0.5) * (static_cast<double>(w) / dw) - 0.5;
      // Keep sampling inside the crop region so neighbouring content does not bleed in.
      sample_bilinear(src, std::clamp(sx, double(x0), double(x1 - 1)),
                      std::clamp(sy, double(y0), double(y1 - 1)), px);
      for (int c = 0; c < 3; ++c) out.at(ox + x, oy + y, c) = to_u8(px[c]);
    }
  }
  return out;
}

Raster resize_bilinear(const Raster& src, int out_w, int out_h) {
  Raster out(out_w, out_h, 0);
  std::array<double, 3> px{};
  const double sx_scale = static_cast<double>(src.width) / out_w;
  const double sy_scale = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      sample_bilinear(src, (x + 0.5) * sx_scale - 0.5, (y + 0.5) * sy_scale - 0.5, px);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = to_u8(px[c]);
    }
  }
  return out;
}

}  // namespace leukmil
