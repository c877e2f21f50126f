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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leukmil/baggen/sequence.hpp"
#include "leukmil/model/classifier.hpp"
#include "leukmil/model/feature_bank.hpp"

namespace leukmil::model {

enum class Aggregation { kMax, kMean };
std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

// Threshold on the ALL probability; ties go to HEALTHY.
inline constexpr double kDecisionThreshold = 0.5;
Diagnosis decide(double all_probability);

// ALL probability of each sequence. Blank entries become zero feature rows.
std::vector<double> sequence_probabilities(const AggregatorClassifier<float>& model,
                                           std::span<const CellSequence> sequences, FeatureCache& cache,
                                           int batch_size = 64);

// ALL probability of each crop presented as a length-1 sequence.
std::vector<double> cell_probabilities(const AggregatorClassifier<float>& model, std::span<const CellCrop> crops,
                                       FeatureCache& cache, int batch_size = 256);

struct PatientPrediction {
  std::string patient_id;
  Diagnosis label = Diagnosis::kHealthy;
  double probability = 0.0;
  std::vector<double> per_sequence;
  bool no_evidence = false;  // bag was empty; predicted HEALTHY without running the model

  nlohmann::json to_json() const;
};

struct PredictOptions {
  baggen::Packing packing = baggen::Packing::kChunk;
  int length = baggen::kDefaultSequenceLength;
  Aggregation aggregation = Aggregation::kMax;
};

// Throws InvariantViolation on an empty bag.
PatientPrediction predict_patient(const AggregatorClassifier<float>& model, const PatientBag& bag,
                                  FeatureCache& cache, const PredictOptions& options = {});

// As predict_patient, but an empty bag yields HEALTHY with no_evidence set.
PatientPrediction predict_or_no_evidence(const AggregatorClassifier<float>& model, const PatientBag& bag,
                                         FeatureCache& cache, const PredictOptions& options = {});

}  // namespace leukmil::model
