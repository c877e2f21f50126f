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

#include "leukmil/baggen/augment.hpp"

#include <cmath>
#include <numbers>

#include "leukmil/core/error.hpp"

namespace leukmil::baggen {

nlohmann::json AugmentationPolicy::to_json() const {
  return {{"rotation", rotation},
          {"translation", translation},
          {"max_translation_px", max_translation_px},
          {"horizontal_flip", horizontal_flip},
          {"vertical_flip", vertical_flip}};
}

AugmentationPolicy AugmentationPolicy::from_json(const nlohmann::json& j) {
  AugmentationPolicy p;
  for (const auto& [key, value] : j.items()) {
    if (key == "rotation") {
      p.rotation = value.get<bool>();
    } else if (key == "translation") {
      p.translation = value.get<bool>();
    } else if (key == "max_translation_px") {
      p.max_translation_px = value.get<double>();
    } else if (key == "horizontal_flip") {
      p.horizontal_flip = value.get<bool>();
    } else if (key == "vertical_flip") {
      p.vertical_flip = value.get<bool>();
    } else {
      throw ConfigError("augmentation '" + key + "' is not allowed; only rotation, translation and flips are");
    }
  }
  if (!(p.max_translation_px >= 0.0)) throw ConfigError("max_translation_px must be non-negative");
  return p;
}

RigidTransform draw_transform(const AugmentationPolicy& policy, Rng& rng) {
  RigidTransform t;
  if (policy.horizontal_flip) t.flip_h = rng.bernoulli(0.5);
  if (policy.vertical_flip) t.flip_v = rng.bernoulli(0.5);
  if (policy.rotation) t.angle_deg = rng.uniform(0.0, 360.0);
  if (policy.translation) {
    t.dx = rng.uniform(-policy.max_translation_px, policy.max_translation_px);
    t.dy = rng.uniform(-policy.max_translation_px, policy.max_translation_px);
  }
  return t;
}

Raster apply_transform(const Raster& src, const RigidTransform& t) {
  if (t.identity()) return src;
  const int w = src.width, h = src.height;
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double rad = t.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  Raster out(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Inverse map: undo translation, then rotation, then flips.
      const double ux = x - t.dx - cx, uy = y - t.dy - cy;
      double sx = c * ux + s * uy + cx;
      double sy = -s * ux + c * uy + cy;
      if (t.flip_h) sx = (w - 1) - sx;
      if (t.flip_v) sy = (h - 1) - sy;
      if (sx < -0.5 || sy < -0.5 || sx > w - 0.5 || sy > h - 0.5) continue;
      sx = std::clamp(sx, 0.0, w - 1.0);
      sy = std::clamp(sy, 0.0, h - 1.0);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1 - fy) * ((1 - fx) * src.at(x0, y0, ch) + fx * src.at(x1, y0, ch)) +
                         fy * ((1 - fx) * src.at(x0, y1, ch) + fx * src.at(x1, y1, ch));
        out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

CellCrop augment(const CellCrop& crop, const AugmentationPolicy& policy, Rng& rng) {
  if (crop.is_blank) throw InvariantViolation("blank crops are not augmented");
  CellCrop out = crop;
  if (policy.empty()) return out;
  out.pixels = apply_transform(crop.pixels, draw_transform(policy, rng));
  return out;
}

}  // namespace leukmil::baggen
