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

#include "leukmil/detect/crop.hpp"

#include <algorithm>
#include <cmath>

#include "leukmil/core/error.hpp"

namespace leukmil::detect {

std::vector<CellCrop> crop_cells(const AnnotatedImage& image, const DetectionResult& result, int crop_size) {
  const int w = image.pixels.width, h = image.pixels.height;
  std::vector<CellCrop> crops;
  crops.reserve(result.boxes.size());
  for (std::size_t k = 0; k < result.boxes.size(); ++k) {
    const BoundingBox& box = result.boxes[k];
    const int x0 = std::clamp(static_cast<int>(std::floor(box.x_min)), 0, w);
    const int y0 = std::clamp(static_cast<int>(std::floor(box.y_min)), 0, h);
    const int x1 = std::clamp(static_cast<int>(std::ceil(box.x_max)), 0, w);
    const int y1 = std::clamp(static_cast<int>(std::ceil(box.y_max)), 0, h);
    if (x1 <= x0 || y1 <= y0) {
      throw InvariantViolation("box " + std::to_string(k) + " of '" + image.image_id + "' is empty after clipping");
    }
    CellCrop crop;
    crop.crop_id = image.image_id + "#" + std::to_string(k);
    crop.pixels = crop_resize_pad(image.pixels, x0, y0, x1, y1, crop_size);
    crop.cell_class = box.cell_class;
    crops.push_back(std::move(crop));
  }
  return crops;
}

}  // namespace leukmil::detect
