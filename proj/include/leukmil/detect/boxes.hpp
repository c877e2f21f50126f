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

#include <array>
#include <span>
#include <vector>

#include "leukmil/core/types.hpp"

namespace leukmil::detect {

// Greedy non-maximum suppression. Returns indices of kept boxes in descending
// score order; ties keep the lower index first.
std::vector<std::size_t> nms(std::span<const BoundingBox> boxes, double iou_threshold);

// Convenience: the kept boxes themselves, sorted by descending score.
std::vector<BoundingBox> apply_nms(std::span<const BoundingBox> boxes, double iou_threshold);

// Center-size regression deltas (dx, dy, dw, dh) of `target` relative to
// `reference`, divided by `weights`.
using Deltas = std::array<double, 4>;
Deltas encode_box(const BoundingBox& reference, const BoundingBox& target, const Deltas& weights);
BoundingBox decode_box(const BoundingBox& reference, const Deltas& deltas, const Deltas& weights);

BoundingBox clip_box(BoundingBox box, int width, int height);

}  // namespace leukmil::detect
