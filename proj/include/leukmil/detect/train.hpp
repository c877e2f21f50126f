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

#include "json.hpp"
#include "leukmil/core/manifest.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/detect/two_stage.hpp"

namespace leukmil::detect {

struct DetectorTrainConfig {
  ClassMap class_map = ClassMap::kCell;
  int epochs = 8;
  // Random-init backbones train for epochs * this factor.
  double random_init_schedule = 1.5;
  double learning_rate = 1e-3;
  double lr_drop_at = 0.75;  // fraction of the schedule after which lr is divided by 10
  double grad_clip_norm = 10.0;
  bool flip_augment = true;
  double train_map_floor = 0.5;
  TwoStageConfig arch;

  nlohmann::json to_json() const;
  static DetectorTrainConfig from_json(const nlohmann::json& j);
};

struct DetectorTrainSummary {
  int images_used = 0;
  int images_skipped = 0;  // train images without boxes
  int epochs_run = 0;
  bool pretrained_backbone = false;
  double final_loss = 0.0;
  double train_map = 0.0;

  nlohmann::json to_json() const;
};

struct TrainedDetector {
  TwoStageDetector model;
  DetectorTrainSummary summary;
};

// Environment variable naming a directory of cached weights; the detector
// looks for `detector_backbone.lmarc` there.
inline constexpr const char* kWeightsDirEnv = "LEUKMIL_WEIGHTS_DIR";
std::optional<std::filesystem::path> pretrained_backbone_path();

// Trains on the manifest's train split. Throws InvariantViolation when no
// train image has boxes and NumericalError when the final train-split mAP does
// not exceed `train_map_floor`.
TrainedDetector train_detector(const DatasetManifest& manifest, const DetectorTrainConfig& config, Rng& rng);

}  // namespace leukmil::detect
