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

#include "leukmil/core/manifest.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/image_io.hpp"
#include "leukmil/core/json_util.hpp"

namespace leukmil {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

std::vector<const ManifestRecord*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

std::vector<std::string> DatasetManifest::patients(std::optional<Split> s) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (s && r.split != *s) continue;
    if (seen.insert(r.patient_id).second) out.push_back(r.patient_id);
  }
  return out;
}

AnnotatedImage DatasetManifest::load_image(const ManifestRecord& record) const {
  AnnotatedImage image;
  image.image_id = record.image_id;
  image.patient_id = record.patient_id;
  image.pixels = read_png((root / record.image).string());
  image.boxes = record.boxes;
  image.diagnosis = record.diagnosis;
  image.validate();
  return image;
}

namespace {

[[noreturn]] void record_error(std::size_t index, const std::string& what) {
  throw FormatError("manifest record " + std::to_string(index) + ": " + what);
}

}  // namespace

BoundingBox box_from_json(const json& j) {
  BoundingBox box;
  box.x_min = j.at("x_min").get<double>();
  box.y_min = j.at("y_min").get<double>();
  box.x_max = j.at("x_max").get<double>();
  box.y_max = j.at("y_max").get<double>();
  if (j.contains("score")) box.score = j.at("score").get<double>();
  if (j.contains("class") && !j.at("class").is_null()) {
    box.cell_class = parse_cell_class(j.at("class").get<std::string>());
  }
  return box;
}

json box_to_json(const BoundingBox& box, bool with_score) {
  json j = {{"x_min", box.x_min}, {"y_min", box.y_min}, {"x_max", box.x_max}, {"y_max", box.y_max}};
  j["class"] = box.cell_class ? json(std::string(to_string(*box.cell_class))) : json(nullptr);
  if (with_score) j["score"] = box.score;
  return j;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest not found: '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") || !doc.contains("records")) {
    throw FormatError("manifest '" + path.string() + "' lacks the version/records header");
  }
  if (doc.at("version").get<int>() != DatasetManifest::kVersion) {
    throw FormatError("unsupported manifest version " + doc.at("version").dump());
  }

  DatasetManifest manifest;
  manifest.root = path.parent_path();
  manifest.synthetic = doc.value("synthetic", false);
  std::set<std::string> ids;
  const auto& records = doc.at("records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ManifestRecord rec;
    try {
      rec.image = r.at("image").get<std::string>();
      rec.image_id = r.contains("image_id") ? r.at("image_id").get<std::string>() : rec.image;
      rec.patient_id = r.contains("patient") ? r.at("patient").get<std::string>() : rec.image_id;
      rec.split = parse_split(r.at("split").get<std::string>());
      if (r.contains("diagnosis") && !r.at("diagnosis").is_null()) {
        rec.diagnosis = parse_diagnosis(r.at("diagnosis").get<std::string>());
      }
      if (r.contains("boxes")) {
        for (const auto& b : r.at("boxes")) {
          rec.boxes.push_back(box_from_json(b));
          const auto& box = rec.boxes.back();
          if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max) || box.x_min < 0 || box.y_min < 0) {
            throw InvariantViolation("invalid bounding box");
          }
        }
      }
    } catch (const json::exception& e) {
      record_error(i, e.what());
    } catch (const Error& e) {
      record_error(i, e.what());
    }
    if (!ids.insert(rec.image_id).second) record_error(i, "duplicate image_id '" + rec.image_id + "'");
    if (!fs::exists(manifest.root / rec.image)) {
      record_error(i, "image path does not exist: '" + (manifest.root / rec.image).string() + "'");
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json records = json::array();
  for (const auto& rec : manifest.records) {
    json boxes = json::array();
    for (const auto& b : rec.boxes) boxes.push_back(box_to_json(b, false));
    records.push_back({{"image", rec.image},
                       {"image_id", rec.image_id},
                       {"patient", rec.patient_id},
                       {"split", std::string(to_string(rec.split))},
                       {"diagnosis", rec.diagnosis ? json(std::string(to_string(*rec.diagnosis))) : json(nullptr)},
                       {"boxes", boxes}});
  }
  json doc = {{"version", DatasetManifest::kVersion}, {"synthetic", manifest.synthetic}, {"records", records}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

}  // namespace leukmil
