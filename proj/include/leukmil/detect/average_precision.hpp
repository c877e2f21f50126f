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

#include <string>
#include <vector>

#include "json.hpp"
#include "leukmil/core/manifest.hpp"
#include "leukmil/detect/detector.hpp"

namespace leukmil::detect {

struct ImageDetections {
  std::vector<BoundingBox> ground_truth;
  std::vector<BoundingBox> predictions;
};

struct ClassAp {
  std::string label;
  double ap = 0.0;
  int ground_truth = 0;
  int predictions = 0;
};

struct MapResult {
  std::vector<ClassAp> per_class;      // classes present in the ground truth
  std::vector<std::string> absent;     // classes excluded for lack of ground truth
  double map = 0.0;                    // unweighted mean over per_class
  double iou_threshold = kDefaultMapIou;

  nlohmann::json to_json() const;
};

// Label used to group boxes for AP: "cell" for the single-class map, else the
// box's cell class (required).
std::string ap_label(ClassMap class_map, const BoundingBox& box);

// Average precision with all-point interpolation. Predictions are ranked by
// descending score across images (ties keep image order, then box order); each
// one claims the unmatched ground-truth box of its class with the highest IoU,
// if that IoU reaches `iou_threshold`.
MapResult compute_map(const std::vector<ImageDetections>& images, ClassMap class_map,
                      double iou_threshold = kDefaultMapIou);

// Score floor used when collecting predictions for AP.
inline constexpr double kMapScoreFloor = 0.05;

// Runs `detector` over one split and scores it against the manifest boxes.
MapResult evaluate_map(const Detector& detector, const DatasetManifest& manifest, Split split,
                       double iou_threshold = kDefaultMapIou, double score_floor = kMapScoreFloor,
                       double nms_iou = kDefaultNmsIou);

}  // namespace leukmil::detect
