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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace leukmil {

// Interleaved 8-bit RGB raster, row-major, HxWx3.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Raster() = default;
  Raster(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool empty() const { return data.empty(); }
  bool all_zero() const;

  bool operator==(const Raster&) const = default;
};

// Bilinear sample with border clamping; coordinates are pixel centers.
void sample_bilinear(const Raster& src, double x, double y, std::span<double, 3> out);

// Crops the region [x0,x1)x[y0,y1) (clipped to the source) and fits it into an
// out_size x out_size raster: the longer side is scaled to out_size, the
// aspect ratio is preserved and the remainder is zero-padded symmetrically.
Raster crop_resize_pad(const Raster& src, int x0, int y0, int x1, int y1, int out_size);

// Bilinear resize to an arbitrary size (used for backbone inputs).
Raster resize_bilinear(const Raster& src, int out_w, int out_h);

}  // namespace leukmil
