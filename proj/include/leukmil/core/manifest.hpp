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
#include <string>
#include <vector>

#include "leukmil/core/types.hpp"

namespace leukmil {

enum class Split { kTrain, kTest };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ManifestRecord {
  std::string image;       // path relative to the manifest root
  std::string image_id;    // defaults to `image` when absent on disk
  std::string patient_id;  // defaults to image_id when absent on disk
  Split split = Split::kTrain;
  std::optional<Diagnosis> diagnosis;
  std::vector<BoundingBox> boxes;
};

struct DatasetManifest {
  static constexpr int kVersion = 1;

  std::filesystem::path root;
  std::vector<ManifestRecord> records;
  // Set by the synthetic generator; gates ground-truth-sourced attacks.
  bool synthetic = false;

  std::vector<const ManifestRecord*> split(Split s) const;
  // Patient ids in first-appearance order.
  std::vector<std::string> patients(std::optional<Split> s = std::nullopt) const;

  AnnotatedImage load_image(const ManifestRecord& record) const;
};

// Parses and validates a manifest. Errors name the offending record index.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace leukmil
