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

#include "leukmil/model/feature_bank.hpp"

#include <algorithm>
#include <string_view>
#include <unordered_set>

#include "leukmil/core/error.hpp"

namespace leukmil::model {

FeatureBank FeatureBank::build(const features::FeatureExtractor& extractor, const baggen::CellPools& pools,
                               const baggen::AugmentationPolicy& policy, int variants, Rng& rng) {
  if (variants < 1) throw ConfigError("augmentation variants must be >= 1");
  FeatureBank bank;
  bank.variants_ = policy.empty() ? 1 : variants;
  bank.n_blast_ = pools.blast.size();
  bank.n_normal_ = pools.normal.size();
  bank.extractor_digest_ = extractor.digest();
  auto encode = [&](const std::vector<CellCrop>& pool) {
    std::vector<Raster> rasters;
    rasters.reserve(pool.size() * bank.variants_);
    for (const auto& crop : pool) {
      rasters.push_back(crop.pixels);
      for (int v = 1; v < bank.variants_; ++v) rasters.push_back(baggen::augment(crop, policy, rng).pixels);
    }
    std::vector<const Raster*> ptrs;
    ptrs.reserve(rasters.size());
    for (const auto& r : rasters) ptrs.push_back(&r);
    return extractor.extract_rasters(ptrs);
  };
  bank.blast_ = encode(pools.blast);
  bank.normal_ = encode(pools.normal);
  if (bank.blast_.cols() == 0) bank.blast_.resize(0, extractor.dim());
  return bank;
}

std::span<const float> FeatureBank::row(baggen::Source source, int index, int variant) const {
  if (source == baggen::Source::kBlank) throw InvariantViolation("blank entries have no bank row");
  const auto& m = source == baggen::Source::kBlast ? blast_ : normal_;
  const Eigen::Index r = static_cast<Eigen::Index>(index) * variants_ + variant;
  if (index < 0 || variant < 0 || variant >= variants_ || r >= m.rows()) {
    throw InvariantViolation("feature bank index out of range");
  }
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

std::uint64_t FeatureCache::key(const Raster& pixels) {
  const std::string_view bytes(reinterpret_cast<const char*>(pixels.data.data()), pixels.data.size());
  return std::hash<std::string_view>{}(bytes) ^ (static_cast<std::uint64_t>(pixels.width) << 48) ^
         (static_cast<std::uint64_t>(pixels.height) << 32);
}

void FeatureCache::prefetch(std::span<const CellCrop> crops) {
  std::vector<const Raster*> missing;
  std::vector<std::uint64_t> keys;
  std::unordered_set<std::uint64_t> pending;
  for (const auto& crop : crops) {
    if (crop.is_blank) continue;
    const std::uint64_t k = key(crop.pixels);
    if (rows_.count(k) || !pending.insert(k).second) continue;
    missing.push_back(&crop.pixels);
    keys.push_back(k);
  }
  if (missing.empty()) return;
  const nn::RowMatrixF f = extractor_->extract_rasters(missing);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const float* p = f.data() + static_cast<Eigen::Index>(i) * f.cols();
    rows_.emplace(keys[i], std::vector<float>(p, p + f.cols()));
  }
}

std::span<const float> FeatureCache::get(const CellCrop& crop) {
  if (crop.is_blank) throw InvariantViolation("blank crops carry no features");
  const std::uint64_t k = key(crop.pixels);
  auto it = rows_.find(k);
  if (it == rows_.end()) {
    prefetch(std::span<const CellCrop>(&crop, 1));
    it = rows_.find(k);
  }
  return it->second;
}

}  // namespace leukmil::model
