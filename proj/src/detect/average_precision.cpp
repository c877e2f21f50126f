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

#include "leukmil/detect/average_precision.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "leukmil/core/error.hpp"

namespace leukmil::detect {

nlohmann::json MapResult::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : per_class) {
    classes.push_back({{"label", c.label}, {"ap", c.ap}, {"ground_truth", c.ground_truth},
                       {"predictions", c.predictions}});
  }
  return {{"map", map}, {"iou_threshold", iou_threshold}, {"per_class", classes}, {"absent", absent}};
}

std::string ap_label(ClassMap class_map, const BoundingBox& box) {
  if (class_map == ClassMap::kCell) return "cell";
  if (!box.cell_class) throw InvariantViolation("two-class AP needs labelled boxes");
  return std::string(to_string(*box.cell_class));
}

namespace {

struct Ranked {
  double score;
  std::size_t image;
  std::size_t box;
};

double class_ap(const std::vector<ImageDetections>& images, ClassMap class_map, const std::string& label,
                double iou_threshold, int n_gt, int* n_pred) {
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t b = 0; b < images[i].predictions.size(); ++b) {
      if (ap_label(class_map, images[i].predictions[b]) == label) {
        ranked.push_back({images[i].predictions[b].score, i, b});
      }
    }
  }
  *n_pred = static_cast<int>(ranked.size());
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> claimed(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) claimed[i].assign(images[i].ground_truth.size(), false);

  std::vector<double> precision, recall;
  int tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& img = images[ranked[k].image];
    const BoundingBox& pred = img.predictions[ranked[k].box];
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
      if (claimed[ranked[k].image][g] || ap_label(class_map, img.ground_truth[g]) != label) continue;
      const double o = iou(pred, img.ground_truth[g]);
      if (o > best) {
        best = o;
        best_g = g;
      }
    }
    if (best >= iou_threshold) {
      claimed[ranked[k].image][best_g] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / n_gt);
  }
  // Precision envelope, then sum over recall steps.
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

}  // namespace

MapResult compute_map(const std::vector<ImageDetections>& images, ClassMap class_map, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("mAP IoU threshold must lie in (0,1]");
  std::vector<std::string> labels;
  if (class_map == ClassMap::kCell) {
    labels = {"cell"};
  } else {
    labels = {std::string(to_string(CellClass::kBlast)), std::string(to_string(CellClass::kNormal))};
  }
  std::map<std::string, int> gt_count;
  for (const auto& img : images) {
    for (const auto& box : img.ground_truth) ++gt_count[ap_label(class_map, box)];
  }
  MapResult result;
  result.iou_threshold = iou_threshold;
  for (const auto& label : labels) {
    const int n_gt = gt_count[label];
    if (n_gt == 0) {
      result.absent.push_back(label);
      continue;
    }
    ClassAp entry;
    entry.label = label;
    entry.ground_truth = n_gt;
    entry.ap = class_ap(images, class_map, label, iou_threshold, n_gt, &entry.predictions);
    result.per_class.push_back(entry);
  }
  if (result.per_class.empty()) throw InvariantViolation("mAP needs at least one ground-truth box");
  double sum = 0.0;
  for (const auto& c : result.per_class) sum += c.ap;
  result.map = sum / static_cast<double>(result.per_class.size());
  return result;
}

MapResult evaluate_map(const Detector& detector, const DatasetManifest& manifest, Split split, double iou_threshold,
                       double score_floor, double nms_iou) {
  std::vector<ImageDetections> images;
  for (const ManifestRecord* record : manifest.split(split)) {
    const AnnotatedImage image = manifest.load_image(*record);
    images.push_back({record->boxes, detect_cells(detector, image, score_floor, nms_iou).boxes});
  }
  if (images.empty()) throw InvariantViolation("split '" + std::string(to_string(split)) + "' is empty");
  return compute_map(images, detector.class_map(), iou_threshold);
}

}  // namespace leukmil::detect
