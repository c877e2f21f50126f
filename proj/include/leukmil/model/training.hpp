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

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "leukmil/baggen/sequence.hpp"
#include "leukmil/core/checkpoint.hpp"
#include "leukmil/features/extractor.hpp"
#include "leukmil/model/classifier.hpp"
#include "leukmil/model/feature_bank.hpp"

namespace leukmil::model {

struct TrainConfig {
  int stage = 1;
  int length = 1;  // 1 for stage 1; 15 by default for stage 2
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double grad_clip_norm = 5.0;
  int sequences_per_epoch = 2048;  // stage 2 only; stage 1 uses every training crop
  int validation_sequences = 512;  // stage 2 only
  double balance = 0.5;
  baggen::CellRange cell_range{5, 15};
  baggen::AugmentationPolicy augmentation = baggen::AugmentationPolicy::standard();
  int augment_variants = 4;
  double holdout_fraction = 0.2;  // per-class share of each pool kept for validation
  features::Activation activation = features::Activation::kRelu;
  bool mask_skip = false;
  std::string early_stop_metric = "macro_f1";  // or "accuracy"
  int patience = 0;                             // 0 trains every epoch and keeps the best
  bool allow_random_init = false;               // stage 2 without a stage-1 checkpoint

  static TrainConfig stage1();
  static TrainConfig stage2();

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  std::string digest() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> val_macro_f1;
};

struct TrainOutcome {
  Checkpoint checkpoint;
  AggregatorClassifier<float> model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 means the initial parameters were never beaten
  double val_accuracy = 0.0;
  std::optional<double> val_macro_f1;
  std::string extractor_digest_before;
  std::string extractor_digest_after;

  nlohmann::json summary() const;
};

// Length-1 training on single crops of both pools. Validation accuracy is the
// held-out single-cell accuracy.
TrainOutcome train_stage1(const baggen::CellPools& pools, const TrainConfig& config,
                          const features::FeatureExtractor& extractor, Rng& rng);

// Length-L training on freshly drawn sequences each epoch, initialised from a
// stage-1 checkpoint. `init` may be null only with allow_random_init.
TrainOutcome train_stage2(const baggen::CellPools& pools, const TrainConfig& config, const Checkpoint* init,
                          const features::FeatureExtractor& extractor, Rng& rng);

// Restores an aggregator checkpoint, checking the extractor digest when given.
AggregatorClassifier<float> model_from_checkpoint(const Checkpoint& checkpoint,
                                                  const std::optional<std::string>& extractor_digest = std::nullopt);

Checkpoint make_checkpoint(const AggregatorClassifier<float>& model, int stage, const TrainConfig& config,
                           const features::FeatureExtractor& extractor);

// Batch of equal-length pool references. With `variant_rng` each non-blank
// entry takes a uniformly drawn bank variant; without it, variant 0.
SequenceBatch<float> assemble_batch(const std::vector<const baggen::SequenceRef*>& refs, const FeatureBank& bank,
                                    Rng* variant_rng);

}  // namespace leukmil::model
