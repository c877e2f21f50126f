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

#include "leukmil/synth/config.hpp"

#include <cmath>
#include <string>

#include "leukmil/core/error.hpp"

namespace leukmil::synth {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("infeasible synth config: " + what);
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  return {a.at(0).get<double>(), a.at(1).get<double>()};
}

}  // namespace

void SynthConfig::validate() const {
  require(image_width >= 32 && image_height >= 32, "image must be at least 32x32");
  require(cells_min >= 1 && cells_min <= cells_max, "cells per image range must satisfy 1 <= min <= max");
  require(blast_fraction > 0.0 && blast_fraction <= 1.0, "blast fraction must lie in (0,1]");
  for (const Range* r : {&normal_cell_radius, &blast_cell_radius, &normal_nucleus_radius, &blast_nucleus_radius}) {
    require(!r->empty() && r->lo > 0, "radius ranges must be non-empty and positive");
  }
  require(blast_nucleus_radius.lo - normal_nucleus_radius.hi >= morphology_margin,
          "blast nucleus radius range must sit above the normal range by the morphology margin");
  require(normal_nucleus_radius.hi < normal_cell_radius.lo, "normal nucleus must fit inside its cell");
  require(blast_nucleus_radius.hi < blast_cell_radius.lo, "blast nucleus must fit inside its cell");
  require(max_eccentricity >= 0.0 && max_eccentricity < 0.5, "eccentricity must lie in [0, 0.5)");
  require(max_overlap_iou >= 0.0 && max_overlap_iou < 1.0, "overlap budget must lie in [0,1)");
  require(crop_size >= 8, "crop size must be at least 8");

  const double max_r = std::max(normal_cell_radius.hi, blast_cell_radius.hi) + 1.0;
  require(2 * max_r + 2 < std::min(image_width, image_height), "largest cell does not fit in the image");
  // Rejection placement of disjoint boxes stalls well before full packing.
  const double box_area = (2 * max_r + 1) * (2 * max_r + 1);
  require(cells_max * box_area <= 0.45 * image_width * image_height,
          "cells_max cells of the largest size cannot be placed within the overlap budget");
}

json SynthConfig::to_json() const {
  return {{"image_width", image_width},
          {"image_height", image_height},
          {"cells_per_image", {cells_min, cells_max}},
          {"blast_fraction", blast_fraction},
          {"normal_cell_radius", range_json(normal_cell_radius)},
          {"blast_cell_radius", range_json(blast_cell_radius)},
          {"normal_nucleus_radius", range_json(normal_nucleus_radius)},
          {"blast_nucleus_radius", range_json(blast_nucleus_radius)},
          {"morphology_margin", morphology_margin},
          {"blast_irregularity", blast_irregularity},
          {"normal_irregularity", normal_irregularity},
          {"max_eccentricity", max_eccentricity},
          {"background", background},
          {"background_tint", background_tint},
          {"stain_jitter", stain_jitter},
          {"red_cells_per_image", red_cells_per_image},
          {"noise_stddev", noise_stddev},
          {"max_overlap_iou", max_overlap_iou},
          {"placement_attempts", placement_attempts},
          {"crop_size", crop_size},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  c.image_width = j.value("image_width", c.image_width);
  c.image_height = j.value("image_height", c.image_height);
  if (j.contains("cells_per_image")) {
    c.cells_min = j["cells_per_image"].at(0).get<int>();
    c.cells_max = j["cells_per_image"].at(1).get<int>();
  }
  c.blast_fraction = j.value("blast_fraction", c.blast_fraction);
  c.normal_cell_radius = range_from(j, "normal_cell_radius", c.normal_cell_radius);
  c.blast_cell_radius = range_from(j, "blast_cell_radius", c.blast_cell_radius);
  c.normal_nucleus_radius = range_from(j, "normal_nucleus_radius", c.normal_nucleus_radius);
  c.blast_nucleus_radius = range_from(j, "blast_nucleus_radius", c.blast_nucleus_radius);
  c.morphology_margin = j.value("morphology_margin", c.morphology_margin);
  c.blast_irregularity = j.value("blast_irregularity", c.blast_irregularity);
  c.normal_irregularity = j.value("normal_irregularity", c.normal_irregularity);
  c.max_eccentricity = j.value("max_eccentricity", c.max_eccentricity);
  if (j.contains("background")) c.background = j["background"].get<std::array<int, 3>>();
  c.background_tint = j.value("background_tint", c.background_tint);
  c.stain_jitter = j.value("stain_jitter", c.stain_jitter);
  c.red_cells_per_image = j.value("red_cells_per_image", c.red_cells_per_image);
  c.noise_stddev = j.value("noise_stddev", c.noise_stddev);
  c.max_overlap_iou = j.value("max_overlap_iou", c.max_overlap_iou);
  c.placement_attempts = j.value("placement_attempts", c.placement_attempts);
  c.crop_size = j.value("crop_size", c.crop_size);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace leukmil::synth
