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

#include <filesystem>
#include <vector>

#include "leukmil/core/manifest.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/core/types.hpp"
#include "leukmil/synth/config.hpp"

namespace leukmil::synth {

// Generator bookkeeping for one rendered cell.
struct CellTruth {
  CellClass cell_class = CellClass::kNormal;
  double center_x = 0;
  double center_y = 0;
  double cell_radius = 0;
  double nucleus_radius = 0;
  BoundingBox box;
};

struct GeneratedImage {
  AnnotatedImage image;
  std::vector<CellTruth> cells;
};

struct GeneratedPatient {
  std::vector<GeneratedImage> images;
  PatientBag bag;
  int blast_count() const;
};

// Renders one smear image with the given per-cell classes.
GeneratedImage render_image(const SynthConfig& config, const std::vector<CellClass>& classes,
                            const std::string& image_id, Rng& rng);

// HEALTHY patients contain only normal cells; ALL patients contain at least
// one blast. Deterministic given (config, rng state).
GeneratedPatient generate_patient(const SynthConfig& config, Diagnosis diagnosis, int n_images,
                                  const std::string& patient_id, Rng& rng);

struct CorpusOptions {
  int n_all = 0;
  int n_healthy = 0;
  int images_min = 1;
  int images_max = 1;
  double test_fraction = 0.15;  // stratified by diagnosis, patient-level
};

// Renders a corpus and writes `<out_dir>/manifest.json` plus PNGs under
// `<out_dir>/images/`. Each patient draws from its own sub-stream.
DatasetManifest generate_corpus(const SynthConfig& config, const CorpusOptions& options,
                                const std::filesystem::path& out_dir, Rng& rng);

// Nucleus-area estimate in pixels from a crop (dark stained pixels), used by
// separability probes.
double nucleus_pixel_fraction(const Raster& crop);

}  // namespace leukmil::synth
