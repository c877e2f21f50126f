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
#include <cstdint>

#include "json.hpp"

namespace leukmil::synth {

struct Range {
  double lo = 0;
  double hi = 0;
  bool empty() const { return !(lo <= hi); }
};

// Procedural smear parameters. Radii are in pixels. Each cell is an ellipse of
// cytoplasm (radius drawn from *_cell_radius) around a nucleus (radius from
// *_nucleus_radius); blast nuclei are larger and have a perturbed outline.
struct SynthConfig {
  int image_width = 128;
  int image_height = 128;
  int cells_min = 3;
  int cells_max = 6;
  double blast_fraction = 0.5;  // per-cell blast probability for ALL patients

  Range normal_cell_radius{10.0, 12.5};
  Range blast_cell_radius{11.0, 13.5};
  Range normal_nucleus_radius{4.0, 5.5};
  Range blast_nucleus_radius{7.0, 9.0};
  double morphology_margin = 1.0;  // blast nucleus lo - normal nucleus hi
  double blast_irregularity = 0.12;
  double normal_irregularity = 0.03;
  double max_eccentricity = 0.12;  // minor axis >= (1 - e) * major

  std::array<int, 3> background{236, 206, 210};
  double background_tint = 8.0;
  double stain_jitter = 0.06;  // per-image multiplicative channel jitter
  int red_cells_per_image = 10;
  double noise_stddev = 3.0;

  double max_overlap_iou = 0.0;
  int placement_attempts = 400;
  int crop_size = 64;
  std::uint64_t seed = 0;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

}  // namespace leukmil::synth
