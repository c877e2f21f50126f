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

#include "leukmil/eval/bags.hpp"

#include <fstream>
#include <map>

#include "leukmil/core/error.hpp"
#include "leukmil/core/image_io.hpp"
#include "leukmil/detect/crop.hpp"

namespace leukmil::eval {

BagSet build_bags(const DatasetManifest& manifest, std::optional<Split> split, const detect::Detector& detector,
                  const BagOptions& options) {
  BagSet set;
  set.synthetic = manifest.synthetic;
  std::map<std::string, std::size_t> index;
  for (const auto& id : manifest.patients(split)) {
    index[id] = set.bags.size();
    PatientBag bag;
    bag.patient_id = id;
    set.bags.push_back(std::move(bag));
  }
  std::vector<bool> has_diagnosis(set.bags.size(), false);
  const bool two_class = detector.class_map() == detect::ClassMap::kBlastNormal;
  for (const auto& record : manifest.records) {
    if (split && record.split != *split) continue;
    const std::size_t b = index.at(record.patient_id);
    PatientBag& bag = set.bags[b];
    if (record.diagnosis) {
      if (has_diagnosis[b] && bag.diagnosis != *record.diagnosis) {
        throw FormatError("patient '" + record.patient_id + "' has conflicting diagnoses");
      }
      bag.diagnosis = *record.diagnosis;
      has_diagnosis[b] = true;
    }
    const AnnotatedImage image = manifest.load_image(record);
    const detect::DetectionResult found =
        detect::detect_cells(detector, image, options.score_threshold, options.nms_iou);
    std::vector<CellCrop> crops = detect::crop_cells(image, found, options.crop_size);
    for (std::size_t k = 0; k < crops.size(); ++k) {
      if (two_class && found.boxes[k].cell_class) set.detector_labels.set(crops[k].crop_id, *found.boxes[k].cell_class);
      std::optional<CellClass> truth;
      double best = options.match_iou;
      for (const auto& gt : image.boxes) {
        const double overlap = iou(found.boxes[k], gt);
        if (overlap >= best && gt.cell_class) {
          best = overlap;
          truth = gt.cell_class;
        }
      }
      crops[k].cell_class = truth;
      bag.cells.push_back(std::move(crops[k]));
    }
    ++set.images;
    set.detections += found.boxes.size();
  }
  for (std::size_t b = 0; b < set.bags.size(); ++b) {
    if (!has_diagnosis[b]) throw FormatError("patient '" + set.bags[b].patient_id + "' has no diagnosis");
  }
  return set;
}

void save_bag(const PatientBag& bag, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "cells");
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t k = 0; k < bag.cells.size(); ++k) {
    const std::string file = "cells/" + std::to_string(k) + ".png";
    write_png(bag.cells[k].pixels, (dir / file).string());
    cells.push_back({{"crop_id", bag.cells[k].crop_id},
                     {"class", bag.cells[k].cell_class ? nlohmann::json(std::string(to_string(*bag.cells[k].cell_class)))
                                                       : nlohmann::json()},
                     {"file", file}});
  }
  std::ofstream out(dir / "bag.json");
  out << nlohmann::json{{"patient_id", bag.patient_id},
                        {"diagnosis", std::string(to_string(bag.diagnosis))},
                        {"cells", cells}}
             .dump(1)
      << '\n';
  if (!out) throw IoError("cannot write '" + (dir / "bag.json").string() + "'");
}

PatientBag load_bag(const std::filesystem::path& dir) {
  const auto path = dir / "bag.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt bag file '" + path.string() + "': " + e.what());
  }
  PatientBag bag;
  bag.patient_id = j.at("patient_id").get<std::string>();
  bag.diagnosis = parse_diagnosis(j.at("diagnosis").get<std::string>());
  for (const auto& c : j.at("cells")) {
    CellCrop crop;
    crop.crop_id = c.at("crop_id").get<std::string>();
    if (!c.at("class").is_null()) crop.cell_class = parse_cell_class(c.at("class").get<std::string>());
    crop.pixels = read_png((dir / c.at("file").get<std::string>()).string());
    bag.cells.push_back(std::move(crop));
  }
  return bag;
}

}  // namespace leukmil::eval
