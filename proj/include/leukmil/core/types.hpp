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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leukmil/core/image.hpp"

namespace leukmil {

// Crop side length used throughout the pipeline unless a dataset overrides it.
inline constexpr int kDefaultCropSize = 64;

enum class CellClass { kBlast, kNormal };
enum class Diagnosis { kAll, kHealthy };

std::string_view to_string(CellClass c);
std::string_view to_string(Diagnosis d);
CellClass parse_cell_class(std::string_view s);
Diagnosis parse_diagnosis(std::string_view s);

struct BoundingBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;
  double score = 1.0;
  std::optional<CellClass> cell_class;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  // Throws InvariantViolation unless the box is non-degenerate, lies within
  // a width x height image and has a score in [0,1].
  void validate(int image_width, int image_height) const;
};

double iou(const BoundingBox& a, const BoundingBox& b);

struct AnnotatedImage {
  std::string image_id;
  std::string patient_id;
  Raster pixels;
  std::vector<BoundingBox> boxes;
  std::optional<Diagnosis> diagnosis;

  void validate() const;
};

struct CellCrop {
  std::string crop_id;
  Raster pixels;
  std::optional<CellClass> cell_class;
  bool is_blank = false;

  static CellCrop blank(int size = kDefaultCropSize);
};

struct PatientBag {
  std::string patient_id;
  std::vector<CellCrop> cells;
  Diagnosis diagnosis = Diagnosis::kHealthy;

  // Number of cells with ground-truth BLAST label, or nullopt when any cell
  // lacks a label.
  std::optional<int> blast_count() const;
};

// A fixed-length, blank-padded series of crops carrying a bag label.
// Construction enforces |entries| == |pad_mask|, pad_mask[i] == is_blank, and
// the bag-label rule: label == ALL exactly when blast_count >= 1. A negative
// blast_count marks an unknown count and skips the label check, as does an
// inherited label (a chunk of a patient bag carries the patient's diagnosis
// whether or not the chunk itself holds a blast).
class CellSequence {
 public:
  enum class LabelSource { kConstructed, kInherited };

  CellSequence(std::vector<CellCrop> entries, Diagnosis label, int blast_count,
               LabelSource source = LabelSource::kConstructed);

  const std::vector<CellCrop>& entries() const { return entries_; }
  const std::vector<bool>& pad_mask() const { return pad_mask_; }
  Diagnosis label() const { return label_; }
  int blast_count() const { return blast_count_; }
  int length() const { return static_cast<int>(entries_.size()); }
  int cell_count() const;
  LabelSource label_source() const { return label_source_; }

 private:
  std::vector<CellCrop> entries_;
  std::vector<bool> pad_mask_;
  Diagnosis label_;
  int blast_count_;
  LabelSource label_source_;
};

}  // namespace leukmil
