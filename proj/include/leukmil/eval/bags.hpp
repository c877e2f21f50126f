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
#include <optional>
#include <vector>

#include "leukmil/core/manifest.hpp"
#include "leukmil/detect/detector.hpp"
#include "leukmil/eval/attack.hpp"

namespace leukmil::eval {

struct BagOptions {
  double score_threshold = detect::kDefaultScoreThreshold;
  double nms_iou = detect::kDefaultNmsIou;
  double match_iou = 0.5;  // detection-to-annotation match for ground-truth cell classes
  int crop_size = kDefaultCropSize;
};

struct BagSet {
  std::vector<PatientBag> bags;       // manifest patient order
  DetectionLabelTable detector_labels;  // filled by two-class detectors
  bool synthetic = false;
  std::size_t images = 0;
  std::size_t detections = 0;
};

// Runs `detector` over every image of the selected split and groups crops by
// patient. A crop's cell_class is the class of the annotation it overlaps at
// IoU >= match_iou (absent otherwise), so it is always ground truth; the
// detector's own classes go to detector_labels. Throws FormatError when a
// patient lacks a diagnosis.
BagSet build_bags(const DatasetManifest& manifest, std::optional<Split> split, const detect::Detector& detector,
                  const BagOptions& options = {});

// Bag directory: bag.json {patient_id, diagnosis, cells: [{crop_id, class, file}]}
// plus cells/<k>.png.
void save_bag(const PatientBag& bag, const std::filesystem::path& dir);
PatientBag load_bag(const std::filesystem::path& dir);

}  // namespace leukmil::eval
