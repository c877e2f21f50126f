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

#include "leukmil/core/metrics.hpp"

#include "leukmil/core/error.hpp"

namespace leukmil {

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport compute_metrics(const Confusion& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) throw InvariantViolation("confusion counts must be >= 0");
  if (c.total() == 0) throw InvariantViolation("confusion matrix is empty");
  MetricsReport r;
  r.confusion = c;
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.sensitivity = ratio(c.tp, c.tp + c.fn);
  r.specificity = ratio(c.tn, c.tn + c.fp);
  // F1 = 2TP / (2TP + FP + FN), per class with that class taken as positive.
  r.f1_all = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  r.f1_healthy = ratio(2 * c.tn, 2 * c.tn + c.fn + c.fp);
  if (r.f1_all && r.f1_healthy) r.macro_f1 = (*r.f1_all + *r.f1_healthy) / 2.0;
  return r;
}

Confusion tally(std::span<const Diagnosis> predicted, std::span<const Diagnosis> actual) {
  if (predicted.size() != actual.size()) throw InvariantViolation("prediction and label counts differ");
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == Diagnosis::kAll;
    const bool a = actual[i] == Diagnosis::kAll;
    if (p && a) ++c.tp;
    if (p && !a) ++c.fp;
    if (!p && a) ++c.fn;
    if (!p && !a) ++c.tn;
  }
  return c;
}

}  // namespace leukmil
