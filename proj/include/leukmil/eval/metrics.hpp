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
#include <span>
#include <vector>

#include "leukmil/core/metrics.hpp"
#include "leukmil/model/predict.hpp"

namespace leukmil::eval {

using leukmil::compute_metrics;
using leukmil::tally;

// Patient-level metrics of predictions against their bags' diagnoses, paired
// by position. Bags flagged no-evidence count as HEALTHY predictions.
MetricsReport patient_metrics(std::span<const model::PatientPrediction> predictions,
                              std::span<const PatientBag> bags);

// Fraction of ALL bags predicted ALL; absent without ALL bags.
std::optional<double> recall_all(std::span<const model::PatientPrediction> predictions,
                                 std::span<const PatientBag> bags);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for fewer than two values
  std::size_t n = 0;
};
MeanStd mean_std(std::span<const double> values);

// Spearman rank correlation with average ranks for ties. Absent when either
// side is constant or fewer than two pairs are given.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

nlohmann::json to_json(const MeanStd& m);
nlohmann::json optional_json(const std::optional<double>& v);

}  // namespace leukmil::eval
