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

#include <vector>

#include "leukmil/detect/detector.hpp"

namespace leukmil::detect {

// One crop_size x crop_size crop per box, in box order. Boxes are clipped to
// the image and snapped outward to whole pixels; a box that is empty after
// clipping raises InvariantViolation. Crop ids are "<image_id>#<index>".
std::vector<CellCrop> crop_cells(const AnnotatedImage& image, const DetectionResult& result,
                                 int crop_size = kDefaultCropSize);

}  // namespace leukmil::detect
