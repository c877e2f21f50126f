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

#include "leukmil/detect/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace leukmil::detect {

std::vector<std::size_t> nms(std::span<const BoundingBox> boxes, double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return boxes[a].score > boxes[b].score; });
  std::vector<std::size_t> keep;
  std::vector<bool> removed(boxes.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t a = order[i];
    if (removed[a]) continue;
    keep.push_back(a);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t b = order[j];
      if (!removed[b] && iou(boxes[a], boxes[b]) > iou_threshold) removed[b] = true;
    }
  }
  return keep;
}

std::vector<BoundingBox> apply_nms(std::span<const BoundingBox> boxes, double iou_threshold) {
  std::vector<BoundingBox> out;
  for (std::size_t i : nms(boxes, iou_threshold)) out.push_back(boxes[i]);
  return out;
}

Deltas encode_box(const BoundingBox& ref, const BoundingBox& target, const Deltas& weights) {
  const double rw = ref.width(), rh = ref.height();
  const double rx = ref.x_min + 0.5 * rw, ry = ref.y_min + 0.5 * rh;
  const double tw = target.width(), th = target.height();
  const double tx = target.x_min + 0.5 * tw, ty = target.y_min + 0.5 * th;
  return {weights[0] * (tx - rx) / rw, weights[1] * (ty - ry) / rh, weights[2] * std::log(tw / rw),
          weights[3] * std::log(th / rh)};
}

BoundingBox decode_box(const BoundingBox& ref, const Deltas& d, const Deltas& weights) {
  static const double kMaxLog = std::log(1000.0 / 16.0);
  const double rw = ref.width(), rh = ref.height();
  const double rx = ref.x_min + 0.5 * rw, ry = ref.y_min + 0.5 * rh;
  const double cx = rx + d[0] / weights[0] * rw;
  const double cy = ry + d[1] / weights[1] * rh;
  const double w = rw * std::exp(std::min(d[2] / weights[2], kMaxLog));
  const double h = rh * std::exp(std::min(d[3] / weights[3], kMaxLog));
  BoundingBox out;
  out.x_min = cx - 0.5 * w;
  out.y_min = cy - 0.5 * h;
  out.x_max = cx + 0.5 * w;
  out.y_max = cy + 0.5 * h;
  out.score = ref.score;
  out.cell_class = ref.cell_class;
  return out;
}

BoundingBox clip_box(BoundingBox box, int width, int height) {
  box.x_min = std::clamp(box.x_min, 0.0, static_cast<double>(width));
  box.x_max = std::clamp(box.x_max, 0.0, static_cast<double>(width));
  box.y_min = std::clamp(box.y_min, 0.0, static_cast<double>(height));
  box.y_max = std::clamp(box.y_max, 0.0, static_cast<double>(height));
  return box;
}

}  // namespace leukmil::detect
