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

#include "leukmil/core/archive.hpp"

namespace leukmil {

inline constexpr int kCheckpointVersion = 1;

// Model parameters plus the provenance needed to resume or evaluate them.
struct Checkpoint {
  std::string kind;  // "aggregator" or "detector"
  int stage = 0;     // training-stage tag; 0 for non-staged models
  std::string config_digest;
  std::string extractor_digest;  // frozen backbone the parameters were trained against
  nlohmann::json config = nlohmann::json::object();
  TensorArchive parameters;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// Throws FormatError on a version mismatch and DigestMismatch when the stored
// frozen-extractor digest differs from `expected_extractor_digest`.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_extractor_digest = std::nullopt);

}  // namespace leukmil
