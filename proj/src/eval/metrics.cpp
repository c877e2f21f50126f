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

#include "leukmil/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leukmil/core/error.hpp"

namespace leukmil::eval {

namespace {

std::vector<Diagnosis> predicted_labels(std::span<const model::PatientPrediction> predictions,
                                        std::span<const PatientBag> bags) {
  if (predictions.size() != bags.size()) throw InvariantViolation("predictions and bags differ in count");
  std::vector<Diagnosis> out;
  out.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].patient_id != bags[i].patient_id) {
      throw InvariantViolation("prediction for '" + predictions[i].patient_id + "' paired with bag '" +
                               bags[i].patient_id + "'");
    }
    out.push_back(predictions[i].no_evidence ? Diagnosis::kHealthy : predictions[i].label);
  }
  return out;
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

MetricsReport patient_metrics(std::span<const model::PatientPrediction> predictions,
                              std::span<const PatientBag> bags) {
  const auto predicted = predicted_labels(predictions, bags);
  std::vector<Diagnosis> actual;
  for (const auto& b : bags) actual.push_back(b.diagnosis);
  return compute_metrics(tally(predicted, actual));
}

std::optional<double> recall_all(std::span<const model::PatientPrediction> predictions,
                                 std::span<const PatientBag> bags) {
  const auto predicted = predicted_labels(predictions, bags);
  std::size_t pos = 0, hit = 0;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    if (bags[i].diagnosis != Diagnosis::kAll) continue;
    ++pos;
    if (predicted[i] == Diagnosis::kAll) ++hit;
  }
  if (pos == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(pos);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  m.n = values.size();
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvariantViolation("spearman inputs differ in length");
  if (x.size() < 2) return std::nullopt;
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const MeanStd mx = mean_std(rx), my = mean_std(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx.mean) * (ry[i] - my.mean);
    sxx += (rx[i] - mx.mean) * (rx[i] - mx.mean);
    syy += (ry[i] - my.mean) * (ry[i] - my.mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"stddev", m.stddev}, {"n", m.n}}; }

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace leukmil::eval
