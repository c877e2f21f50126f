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

#include "leukmil/core/types.hpp"

#include <algorithm>
#include <cmath>

#include "leukmil/core/error.hpp"

namespace leukmil {

std::string_view to_string(CellClass c) { return c == CellClass::kBlast ? "BLAST" : "NORMAL"; }

std::string_view to_string(Diagnosis d) { return d == Diagnosis::kAll ? "ALL" : "HEALTHY"; }

CellClass parse_cell_class(std::string_view s) {
  if (s == "BLAST") return CellClass::kBlast;
  if (s == "NORMAL") return CellClass::kNormal;
  throw FormatError("unknown cell class '" + std::string(s) + "'");
}

Diagnosis parse_diagnosis(std::string_view s) {
  if (s == "ALL") return Diagnosis::kAll;
  if (s == "HEALTHY") return Diagnosis::kHealthy;
  throw FormatError("unknown diagnosis '" + std::string(s) + "'");
}

void BoundingBox::validate(int image_width, int image_height) const {
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw InvariantViolation("degenerate bounding box");
  }
  if (x_min < 0 || y_min < 0 || x_max > image_width || y_max > image_height) {
    throw InvariantViolation("bounding box outside image bounds");
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    throw InvariantViolation("bounding box score outside [0,1]");
  }
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

void AnnotatedImage::validate() const {
  if (pixels.width <= 0 || pixels.height <= 0 ||
      pixels.data.size() != static_cast<std::size_t>(pixels.width) * pixels.height * 3) {
    throw InvariantViolation("image '" + image_id + "' has an invalid raster");
  }
  for (const auto& box : boxes) box.validate(pixels.width, pixels.height);
}

CellCrop CellCrop::blank(int size) {
  CellCrop crop;
  crop.crop_id = "blank";
  crop.pixels = Raster(size, size, 0);
  crop.is_blank = true;
  return crop;
}

std::optional<int> PatientBag::blast_count() const {
  int count = 0;
  for (const auto& cell : cells) {
    if (!cell.cell_class) return std::nullopt;
    if (*cell.cell_class == CellClass::kBlast) ++count;
  }
  return count;
}

CellSequence::CellSequence(std::vector<CellCrop> entries, Diagnosis label, int blast_count, LabelSource source)
    : entries_(std::move(entries)), label_(label), blast_count_(blast_count), label_source_(source) {
  if (entries_.empty()) throw InvariantViolation("sequence must have length >= 1");
  pad_mask_.reserve(entries_.size());
  const int side = entries_.front().pixels.width;
  for (const auto& e : entries_) {
    if (e.pixels.width != side || e.pixels.height != side) {
      throw InvariantViolation("sequence entries must share one crop size");
    }
    if (e.is_blank && e.cell_class) {
      throw InvariantViolation("blank entry must not carry a cell class");
    }
    pad_mask_.push_back(e.is_blank);
  }
  if (source == LabelSource::kConstructed && blast_count_ >= 0 && ((label_ == Diagnosis::kAll) != (blast_count_ >= 1))) {
    throw InvariantViolation("sequence label contradicts blast count: label=" +
                             std::string(to_string(label_)) +
                             " blast_count=" + std::to_string(blast_count_));
  }
}

int CellSequence::cell_count() const {
  return static_cast<int>(std::count(pad_mask_.begin(), pad_mask_.end(), false));
}

}  // namespace leukmil
