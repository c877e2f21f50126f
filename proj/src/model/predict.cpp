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

#include "leukmil/model/predict.hpp"

#include <algorithm>
#include <numeric>

#include "leukmil/core/error.hpp"

namespace leukmil::model {

std::string_view to_string(Aggregation a) { return a == Aggregation::kMax ? "max" : "mean"; }

Aggregation parse_aggregation(std::string_view s) {
  if (s == "max") return Aggregation::kMax;
  if (s == "mean") return Aggregation::kMean;
  throw ConfigError("unknown aggregation '" + std::string(s) + "' (expected max or mean)");
}

Diagnosis decide(double all_probability) {
  return all_probability > kDecisionThreshold ? Diagnosis::kAll : Diagnosis::kHealthy;
}

std::vector<double> sequence_probabilities(const AggregatorClassifier<float>& model,
                                           std::span<const CellSequence> sequences, FeatureCache& cache,
                                           int batch_size) {
  if (cache.dim() != model.config().feature_dim) {
    throw ConfigError("extractor feature size " + std::to_string(cache.dim()) + " does not match model input " +
                      std::to_string(model.config().feature_dim));
  }
  std::vector<double> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) cache.prefetch(s.entries());
  for (std::size_t start = 0; start < sequences.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(sequences.size(), start + static_cast<std::size_t>(batch_size));
    const int B = static_cast<int>(end - start);
    const int L = sequences[start].length();
    SequenceBatch<float> batch;
    batch.batch = B;
    batch.length = L;
    batch.features = nn::Mat<float>::Zero(static_cast<Eigen::Index>(B) * L, cache.dim());
    batch.present.assign(static_cast<std::size_t>(B) * L, false);
    for (int b = 0; b < B; ++b) {
      const auto& seq = sequences[start + b];
      if (seq.length() != L) throw InvariantViolation("sequences in one batch differ in length");
      for (int t = 0; t < L; ++t) {
        const CellCrop& crop = seq.entries()[t];
        if (crop.is_blank) continue;
        const auto row = cache.get(crop);
        const std::size_t r = static_cast<std::size_t>(t) * B + b;
        std::copy(row.begin(), row.end(), batch.features.row(static_cast<Eigen::Index>(r)).data());
        batch.present[r] = true;
      }
    }
    const auto pred = model.forward(batch);
    for (int b = 0; b < B; ++b) out.push_back(pred.probs(b, kAllIndex));
  }
  return out;
}

std::vector<double> cell_probabilities(const AggregatorClassifier<float>& model, std::span<const CellCrop> crops,
                                       FeatureCache& cache, int batch_size) {
  std::vector<CellSequence> singles;
  singles.reserve(crops.size());
  for (const auto& c : crops) {
    if (c.is_blank) throw InvariantViolation("cannot classify a blank crop");
    singles.emplace_back(std::vector<CellCrop>{c}, Diagnosis::kHealthy, -1);
  }
  return sequence_probabilities(model, singles, cache, batch_size);
}

nlohmann::json PatientPrediction::to_json() const {
  return {{"patient_id", patient_id},
          {"label", std::string(leukmil::to_string(label))},
          {"probability", probability},
          {"per_sequence", per_sequence},
          {"no_evidence", no_evidence}};
}

PatientPrediction predict_patient(const AggregatorClassifier<float>& model, const PatientBag& bag,
                                  FeatureCache& cache, const PredictOptions& options) {
  if (bag.cells.empty()) throw InvariantViolation("cannot predict on empty bag '" + bag.patient_id + "'");
  const auto sequences = baggen::bag_to_sequences(bag, options.length, options.packing);
  PatientPrediction p;
  p.patient_id = bag.patient_id;
  p.per_sequence = sequence_probabilities(model, sequences, cache);
  if (options.aggregation == Aggregation::kMax) {
    p.probability = *std::max_element(p.per_sequence.begin(), p.per_sequence.end());
  } else {
    p.probability = std::accumulate(p.per_sequence.begin(), p.per_sequence.end(), 0.0) /
                    static_cast<double>(p.per_sequence.size());
  }
  p.label = decide(p.probability);
  return p;
}

PatientPrediction predict_or_no_evidence(const AggregatorClassifier<float>& model, const PatientBag& bag,
                                         FeatureCache& cache, const PredictOptions& options) {
  if (!bag.cells.empty()) return predict_patient(model, bag, cache, options);
  PatientPrediction p;
  p.patient_id = bag.patient_id;
  p.no_evidence = true;
  return p;
}

}  // namespace leukmil::model
