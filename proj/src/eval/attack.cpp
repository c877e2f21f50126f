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

#include "leukmil/eval/attack.hpp"

#include "leukmil/core/error.hpp"
#include "leukmil/eval/metrics.hpp"
#include "leukmil/eval/partition.hpp"

namespace leukmil::eval {

std::string_view to_string(AttackMode m) {
  switch (m) {
    case AttackMode::kNone: return "none";
    case AttackMode::kRemoveBlast: return "remove-blast";
    case AttackMode::kRemoveNormal: return "remove-normal";
  }
  return "?";
}

AttackMode parse_attack_mode(std::string_view s) {
  if (s == "none") return AttackMode::kNone;
  if (s == "remove-blast") return AttackMode::kRemoveBlast;
  if (s == "remove-normal") return AttackMode::kRemoveNormal;
  throw ConfigError("unknown attack '" + std::string(s) + "' (expected none, remove-blast or remove-normal)");
}

std::string_view to_string(ClassSource s) {
  switch (s) {
    case ClassSource::kGroundTruth: return "gt";
    case ClassSource::kDetector: return "detector";
    case ClassSource::kModel: return "model";
  }
  return "?";
}

ClassSource parse_class_source(std::string_view s) {
  if (s == "gt") return ClassSource::kGroundTruth;
  if (s == "detector") return ClassSource::kDetector;
  if (s == "model") return ClassSource::kModel;
  throw ConfigError("unknown class source '" + std::string(s) + "' (expected gt, detector or model)");
}

std::vector<CellClass> GroundTruthClassifier::classify(std::span<const CellCrop> cells) {
  std::vector<CellClass> out;
  out.reserve(cells.size());
  for (const auto& c : cells) {
    if (!c.cell_class) throw ConfigError("crop '" + c.crop_id + "' has no ground-truth class");
    out.push_back(*c.cell_class);
  }
  return out;
}

std::vector<CellClass> DetectionLabelTable::classify(std::span<const CellCrop> cells) {
  std::vector<CellClass> out;
  out.reserve(cells.size());
  for (const auto& c : cells) {
    const auto it = labels_.find(c.crop_id);
    if (it == labels_.end()) throw ConfigError("crop '" + c.crop_id + "' has no detector class");
    out.push_back(it->second);
  }
  return out;
}

std::vector<CellClass> ModelCellClassifier::classify(std::span<const CellCrop> cells) {
  const auto probs = model::cell_probabilities(*model_, cells, *cache_);
  std::vector<CellClass> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(model::decide(p) == Diagnosis::kAll ? CellClass::kBlast : CellClass::kNormal);
  return out;
}

AttackedBag apply_attack(const PatientBag& bag, const AttackSpec& spec, CellClassifier* classifier) {
  AttackedBag out;
  if (spec.mode == AttackMode::kNone) {
    out.bag = bag;
    out.emptied = bag.cells.empty();
    return out;
  }
  if (classifier == nullptr) throw ConfigError("attack " + std::string(to_string(spec.mode)) + " needs a cell classifier");
  if (classifier->source() != spec.source) {
    throw ConfigError("attack expects class source '" + std::string(to_string(spec.source)) + "', got '" +
                      std::string(to_string(classifier->source())) + "'");
  }
  const auto classes = classifier->classify(bag.cells);
  const CellClass removed = spec.mode == AttackMode::kRemoveBlast ? CellClass::kBlast : CellClass::kNormal;
  out.bag.patient_id = bag.patient_id;
  out.bag.diagnosis = bag.diagnosis;
  for (std::size_t i = 0; i < bag.cells.size(); ++i) {
    if (classes[i] == removed) {
      ++out.removed;
    } else {
      out.bag.cells.push_back(bag.cells[i]);
    }
  }
  out.emptied = out.bag.cells.empty();
  return out;
}

nlohmann::json AttackTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"group_size", r.group_size},
                         {"attack", std::string(eval::to_string(r.mode))},
                         {"all_bags", r.all_bags},
                         {"predicted_all", r.predicted_all},
                         {"emptied", r.emptied},
                         {"recall", optional_json(r.recall)}});
  }
  return {{"class_source", std::string(eval::to_string(source))}, {"rows", rows_json}};
}

const AttackRow* AttackTable::find(int group_size, AttackMode mode) const {
  for (const auto& r : rows) {
    if (r.group_size == group_size && r.mode == mode) return &r;
  }
  return nullptr;
}

AttackTable run_attack_experiment(const model::AggregatorClassifier<float>& model, const std::vector<PatientBag>& bags,
                                  std::span<const AttackMode> modes, std::span<const int> group_sizes,
                                  CellClassifier& classifier, model::FeatureCache& cache, Rng& rng,
                                  const model::PredictOptions& options) {
  std::vector<PatientBag> positives;
  for (const auto& b : bags) {
    if (b.diagnosis == Diagnosis::kAll) positives.push_back(b);
  }
  if (positives.empty()) throw InvariantViolation("attack experiment needs at least one ALL bag");
  AttackTable table;
  table.source = classifier.source();
  for (int size : group_sizes) {
    std::vector<PatientBag> units = positives;
    if (size > 0) units = partition_patients(positives, PartitionSpec{size}, rng);
    for (AttackMode mode : modes) {
      AttackRow row;
      row.group_size = size;
      row.mode = mode;
      row.all_bags = units.size();
      for (const auto& unit : units) {
        const AttackedBag attacked = apply_attack(unit, AttackSpec{mode, classifier.source()}, &classifier);
        if (attacked.emptied) ++row.emptied;
        const auto pred = model::predict_or_no_evidence(model, attacked.bag, cache, options);
        if (!pred.no_evidence && pred.label == Diagnosis::kAll) ++row.predicted_all;
      }
      if (row.all_bags > 0) row.recall = static_cast<double>(row.predicted_all) / static_cast<double>(row.all_bags);
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace leukmil::eval
