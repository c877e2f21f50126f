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

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leukmil/core/types.hpp"
#include "leukmil/model/predict.hpp"

namespace leukmil::eval {

enum class AttackMode { kNone, kRemoveBlast, kRemoveNormal };
enum class ClassSource { kGroundTruth, kDetector, kModel };

std::string_view to_string(AttackMode m);
AttackMode parse_attack_mode(std::string_view s);  // none | remove-blast | remove-normal
std::string_view to_string(ClassSource s);
ClassSource parse_class_source(std::string_view s);  // gt | detector | model

struct AttackSpec {
  AttackMode mode = AttackMode::kNone;
  ClassSource source = ClassSource::kGroundTruth;
};

// Per-cell BLAST/NORMAL decisions for attacks and count baselines.
class CellClassifier {
 public:
  virtual ~CellClassifier() = default;
  virtual ClassSource source() const = 0;
  virtual std::vector<CellClass> classify(std::span<const CellCrop> cells) = 0;
};

// Reads each crop's annotation; throws ConfigError on an unlabelled crop.
class GroundTruthClassifier final : public CellClassifier {
 public:
  ClassSource source() const override { return ClassSource::kGroundTruth; }
  std::vector<CellClass> classify(std::span<const CellCrop> cells) override;
};

// Classes assigned by a two-class detector, keyed by crop id.
class DetectionLabelTable final : public CellClassifier {
 public:
  ClassSource source() const override { return ClassSource::kDetector; }
  std::vector<CellClass> classify(std::span<const CellCrop> cells) override;

  void set(const std::string& crop_id, CellClass c) { labels_[crop_id] = c; }
  bool empty() const { return labels_.empty(); }
  std::size_t size() const { return labels_.size(); }

 private:
  std::map<std::string, CellClass> labels_;
};

// BLAST when the model's single-cell ALL probability exceeds 0.5.
class ModelCellClassifier final : public CellClassifier {
 public:
  ModelCellClassifier(const model::AggregatorClassifier<float>& model, model::FeatureCache& cache)
      : model_(&model), cache_(&cache) {}
  ClassSource source() const override { return ClassSource::kModel; }
  std::vector<CellClass> classify(std::span<const CellCrop> cells) override;

 private:
  const model::AggregatorClassifier<float>* model_;
  model::FeatureCache* cache_;
};

struct AttackedBag {
  PatientBag bag;
  std::size_t removed = 0;
  bool emptied = false;  // attack removed every cell
};

// REMOVE_BLAST keeps cells classified NORMAL, REMOVE_NORMAL keeps those
// classified BLAST, NONE is the identity. The classifier must match the
// spec's source; it may be null only for NONE.
AttackedBag apply_attack(const PatientBag& bag, const AttackSpec& spec, CellClassifier* classifier);

struct AttackRow {
  int group_size = 0;  // 0: whole bags
  AttackMode mode = AttackMode::kNone;
  std::size_t all_bags = 0;
  std::size_t predicted_all = 0;
  std::size_t emptied = 0;
  std::optional<double> recall;
};

struct AttackTable {
  ClassSource source = ClassSource::kGroundTruth;
  std::vector<AttackRow> rows;

  nlohmann::json to_json() const;
  const AttackRow* find(int group_size, AttackMode mode) const;
};

// Recall over the ALL bags for every (group size, mode). Group size 0
// evaluates whole bags; any other size partitions first with `rng`, using the
// same partition for every mode.
AttackTable run_attack_experiment(const model::AggregatorClassifier<float>& model, const std::vector<PatientBag>& bags,
                                  std::span<const AttackMode> modes, std::span<const int> group_sizes,
                                  CellClassifier& classifier, model::FeatureCache& cache, Rng& rng,
                                  const model::PredictOptions& options = {});

}  // namespace leukmil::eval
