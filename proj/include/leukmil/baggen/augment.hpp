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

#include "json.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/core/types.hpp"

namespace leukmil::baggen {

// Rigid, label-preserving transforms only. The fields below are the whole
// vocabulary: there is no way to ask for shear, anisotropic scale or warps.
struct AugmentationPolicy {
  bool rotation = false;  // uniform angle in [0, 360)
  bool translation = false;
  double max_translation_px = 4.0;  // per axis, uniform in [-max, max]
  bool horizontal_flip = false;     // each with probability 1/2
  bool vertical_flip = false;

  static AugmentationPolicy none() { return {}; }
  static AugmentationPolicy standard() { return {true, true, 4.0, true, true}; }

  bool empty() const { return !rotation && !translation && !horizontal_flip && !vertical_flip; }

  nlohmann::json to_json() const;
  // Unknown keys are rejected with ConfigError.
  static AugmentationPolicy from_json(const nlohmann::json& j);
};

// Concrete transform draw: flips first, then rotation about the crop centre,
// then translation. Uncovered pixels become zero.
struct RigidTransform {
  double angle_deg = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  bool flip_h = false;
  bool flip_v = false;

  bool identity() const { return angle_deg == 0.0 && dx == 0.0 && dy == 0.0 && !flip_h && !flip_v; }
};

RigidTransform draw_transform(const AugmentationPolicy& policy, Rng& rng);
Raster apply_transform(const Raster& src, const RigidTransform& t);

// Throws InvariantViolation for blank crops. Keeps crop_id and cell_class.
CellCrop augment(const CellCrop& crop, const AugmentationPolicy& policy, Rng& rng);

}  // namespace leukmil::baggen
