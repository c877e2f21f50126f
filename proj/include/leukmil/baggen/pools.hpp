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
#include <utility>
#include <vector>

#include "leukmil/core/manifest.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/core/types.hpp"

namespace leukmil::baggen {

// Labelled single-cell crops, one pool per class.
struct CellPools {
  std::vector<CellCrop> blast;
  std::vector<CellCrop> normal;

  std::size_t size() const { return blast.size() + normal.size(); }
  int crop_size() const;
  // Throws InvariantViolation unless every crop is non-blank, labelled with
  // its pool's class, square and of a shared size, and crop ids are unique.
  void validate() const;
};

// Sorts labelled crops into pools; unlabelled or blank crops are rejected.
CellPools build_pools(std::vector<CellCrop> crops);

// Ground-truth crops of every box in the selected split.
CellPools pools_from_manifest(const DatasetManifest& manifest, std::optional<Split> split,
                              int crop_size = kDefaultCropSize);

// Per-class holdout: moves round(fraction * |pool|) random crops of each pool
// into the second result. Both halves keep at least one crop per class.
std::pair<CellPools, CellPools> split_pools(const CellPools& pools, double holdout_fraction, Rng& rng);

// `<dir>/pools.json` plus one PNG per crop under `<dir>/crops/`.
void save_pools(const CellPools& pools, const std::filesystem::path& dir);
CellPools load_pools(const std::filesystem::path& dir);

}  // namespace leukmil::baggen
