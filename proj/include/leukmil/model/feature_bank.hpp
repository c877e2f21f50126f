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
#include <span>
#include <unordered_map>
#include <vector>

#include "leukmil/baggen/sequence.hpp"
#include "leukmil/features/extractor.hpp"

namespace leukmil::model {

// Frozen-extractor features of every pool crop, precomputed once. Because the
// extractor never changes, augmentation at load time becomes a choice among
// `variants` precomputed draws per crop; variant 0 is the unaugmented crop.
class FeatureBank {
 public:
  static FeatureBank build(const features::FeatureExtractor& extractor, const baggen::CellPools& pools,
                           const baggen::AugmentationPolicy& policy, int variants, Rng& rng);

  int dim() const { return static_cast<int>(blast_.cols()); }
  int variants() const { return variants_; }
  std::size_t blast_count() const { return n_blast_; }
  std::size_t normal_count() const { return n_normal_; }
  const std::string& extractor_digest() const { return extractor_digest_; }

  // Source must not be kBlank.
  std::span<const float> row(baggen::Source source, int index, int variant) const;

 private:
  nn::RowMatrixF blast_;   // row index * variants + variant
  nn::RowMatrixF normal_;
  int variants_ = 1;
  std::size_t n_blast_ = 0;
  std::size_t n_normal_ = 0;
  std::string extractor_digest_;
};

// Memoised extraction keyed by pixel content, for evaluation passes that see
// the same crops many times. Not thread-safe.
class FeatureCache {
 public:
  explicit FeatureCache(const features::FeatureExtractor& extractor) : extractor_(&extractor) {}

  const features::FeatureExtractor& extractor() const { return *extractor_; }
  int dim() const { return extractor_->dim(); }
  // Extracts any crops not yet cached; blanks are skipped.
  void prefetch(std::span<const CellCrop> crops);
  // Features of a non-blank crop, extracting on a miss.
  std::span<const float> get(const CellCrop& crop);
  std::size_t size() const { return rows_.size(); }

 private:
  static std::uint64_t key(const Raster& pixels);

  const features::FeatureExtractor* extractor_;
  std::unordered_map<std::uint64_t, std::vector<float>> rows_;
};

}  // namespace leukmil::model
