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

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leukmil/core/types.hpp"
#include "leukmil/nn/tensor.hpp"

namespace leukmil::features {

// Registry entry. Normalisation constants belong to the backbone.
struct BackboneSpec {
  std::string name;
  int dim = 0;         // d_g
  int input_size = 0;  // square input side; crops are resized to it
  std::array<float, 3> mean{};
  std::array<float, 3> stddev{};
};

const std::vector<BackboneSpec>& backbone_registry();
// Throws ConfigError naming the unknown backbone and the valid choices.
const BackboneSpec& backbone_spec(std::string_view name);

// Forward-only network that maps a normalised NCHW batch to N x d_g features.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual nn::RowMatrixF forward(const nn::Tensor& batch) const = 0;
  virtual std::vector<nn::Param*> params() = 0;
  // Images per forward call when extracting many crops.
  virtual int batch_size() const { return 1; }

  std::vector<const nn::Param*> params() const;
};

// Builds the architecture with deterministic random weights.
std::unique_ptr<Backbone> build_backbone(std::string_view name);

// Directory searched for `<backbone>.lmarc` weight archives.
inline constexpr const char* kWeightsDirEnv = "LEUKMIL_WEIGHTS_DIR";

// Frozen global feature extractor. All methods are const and thread-safe.
class FeatureExtractor {
 public:
  // Loads `<weights_dir>/<name>.lmarc` when present (default directory from
  // LEUKMIL_WEIGHTS_DIR); otherwise keeps the fixed-seed random weights and
  // reports pretrained() == false.
  static FeatureExtractor create(std::string_view name,
                                 std::optional<std::filesystem::path> weights_dir = std::nullopt);

  const BackboneSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  int dim() const { return spec_.dim; }
  bool pretrained() const { return pretrained_; }

  // SHA-256 over the backbone name and every weight, recomputed on each call.
  std::string digest() const;

  // Throws InvariantViolation for blank crops.
  std::vector<float> extract_global(const CellCrop& crop) const;
  // One row per crop, in input order.
  nn::RowMatrixF extract_batch(std::span<const CellCrop> crops) const;
  nn::RowMatrixF extract_rasters(std::span<const Raster* const> rasters) const;

 private:
  FeatureExtractor(BackboneSpec spec, std::unique_ptr<Backbone> backbone, bool pretrained)
      : spec_(std::move(spec)), backbone_(std::move(backbone)), pretrained_(pretrained) {}

  nn::Tensor prepare(std::span<const Raster* const> rasters) const;

  BackboneSpec spec_;
  std::shared_ptr<const Backbone> backbone_;
  bool pretrained_ = false;
};

}  // namespace leukmil::features
