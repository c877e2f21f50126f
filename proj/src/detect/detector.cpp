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

#include "leukmil/detect/detector.hpp"

#include "leukmil/core/checkpoint.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/detect/two_stage.hpp"

namespace leukmil::detect {

std::string_view to_string(ClassMap m) { return m == ClassMap::kCell ? "cell" : "blast_normal"; }

ClassMap parse_class_map(std::string_view s) {
  if (s == "cell") return ClassMap::kCell;
  if (s == "blast_normal") return ClassMap::kBlastNormal;
  throw ConfigError("unknown class map '" + std::string(s) + "' (expected cell or blast_normal)");
}

int foreground_classes(ClassMap m) { return m == ClassMap::kCell ? 1 : 2; }

std::optional<CellClass> class_of(ClassMap m, int foreground_index) {
  if (m == ClassMap::kCell) return std::nullopt;
  return foreground_index == 1 ? CellClass::kBlast : CellClass::kNormal;
}

int index_of(ClassMap m, const BoundingBox& box) {
  if (m == ClassMap::kCell) return 1;
  if (!box.cell_class) throw InvariantViolation("two-class detector needs labelled boxes");
  return *box.cell_class == CellClass::kBlast ? 1 : 2;
}

void DetectionResult::validate(int image_width, int image_height) const {
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    boxes[i].validate(image_width, image_height);
    if (i > 0 && boxes[i].score > boxes[i - 1].score) {
      throw InvariantViolation("detection scores are not sorted for '" + image_id + "'");
    }
  }
}

DetectionResult detect_cells(const Detector& detector, const AnnotatedImage& image, double score_threshold,
                             double nms_iou) {
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw ConfigError("score threshold must lie in [0,1]");
  }
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw ConfigError("NMS IoU must lie in [0,1]");
  if (image.pixels.width < kMinDetectorInput || image.pixels.height < kMinDetectorInput) {
    throw InvariantViolation("image '" + image.image_id + "' is smaller than the minimum detector input of " +
                             std::to_string(kMinDetectorInput) + " px");
  }
  DetectionResult result = detector.run(image, score_threshold, nms_iou);
  result.validate(image.pixels.width, image.pixels.height);
  return result;
}

OracleDetector::OracleDetector(const DatasetManifest& manifest, ClassMap class_map) : class_map_(class_map) {
  for (const auto& record : manifest.records) truth_[record.image_id] = record.boxes;
}

DetectionResult OracleDetector::run(const AnnotatedImage& image, double score_threshold, double) const {
  DetectionResult result;
  result.image_id = image.image_id;
  const auto it = truth_.find(image.image_id);
  const std::vector<BoundingBox>& source = it != truth_.end() ? it->second : image.boxes;
  for (BoundingBox box : source) {
    box.score = 1.0;
    if (class_map_ == ClassMap::kCell) box.cell_class.reset();
    if (box.score > score_threshold) result.boxes.push_back(box);
  }
  return result;
}

std::unique_ptr<Detector> oracle_detector(const DatasetManifest& manifest, ClassMap class_map) {
  return std::make_unique<OracleDetector>(manifest, class_map);
}

std::unique_ptr<Detector> load_detector(const std::filesystem::path& checkpoint) {
  return std::make_unique<TwoStageDetector>(TwoStageDetector::from_checkpoint(load_checkpoint(checkpoint)));
}

}  // namespace leukmil::detect
