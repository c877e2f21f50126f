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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "leukmil/core/manifest.hpp"
#include "leukmil/core/types.hpp"

namespace leukmil::detect {

// Which labels a detector emits: one anonymous "cell" class, or BLAST/NORMAL.
enum class ClassMap { kCell, kBlastNormal };

std::string_view to_string(ClassMap m);
ClassMap parse_class_map(std::string_view s);
int foreground_classes(ClassMap m);
// Foreground index (1-based) to CellClass; nullopt for kCell.
std::optional<CellClass> class_of(ClassMap m, int foreground_index);
int index_of(ClassMap m, const BoundingBox& box);

inline constexpr double kDefaultScoreThreshold = 0.5;
inline constexpr double kDefaultNmsIou = 0.5;
inline constexpr double kDefaultMapIou = 0.5;
inline constexpr int kMinDetectorInput = 32;

struct DetectionResult {
  std::string image_id;
  std::vector<BoundingBox> boxes;  // descending score

  void validate(int image_width, int image_height) const;
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string kind() const = 0;
  virtual ClassMap class_map() const = 0;
  // Raw detections above `score_threshold` after per-class then cross-class
  // NMS at `nms_iou`, sorted by descending score.
  virtual DetectionResult run(const AnnotatedImage& image, double score_threshold, double nms_iou) const = 0;
};

// Validates thresholds and input size, then runs the detector.
DetectionResult detect_cells(const Detector& detector, const AnnotatedImage& image,
                             double score_threshold = kDefaultScoreThreshold, double nms_iou = kDefaultNmsIou);

// Replays ground-truth boxes with score 1.0. Images present in the manifest are
// answered from it; any other image falls back to its own annotations.
class OracleDetector final : public Detector {
 public:
  OracleDetector(const DatasetManifest& manifest, ClassMap class_map);

  std::string kind() const override { return "oracle"; }
  ClassMap class_map() const override { return class_map_; }
  DetectionResult run(const AnnotatedImage& image, double score_threshold, double nms_iou) const override;

 private:
  ClassMap class_map_;
  std::map<std::string, std::vector<BoundingBox>> truth_;
};

std::unique_ptr<Detector> oracle_detector(const DatasetManifest& manifest, ClassMap class_map = ClassMap::kBlastNormal);

// Loads a trained detector checkpoint.
std::unique_ptr<Detector> load_detector(const std::filesystem::path& checkpoint);

}  // namespace leukmil::detect
