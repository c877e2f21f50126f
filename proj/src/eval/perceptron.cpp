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

#include "leukmil/eval/perceptron.hpp"

#include <algorithm>

#include "leukmil/core/error.hpp"

namespace leukmil::eval {

nlohmann::json PerceptronResult::to_json() const {
  return {{"weights", {weights[0], weights[1], weights[2]}}, {"accuracy", accuracy}, {"epochs_run", epochs_run}};
}

PerceptronResult train_perceptron(const std::vector<CountSample>& samples, int max_epochs) {
  if (samples.empty()) throw InvariantViolation("perceptron needs at least one sample");
  const bool mixed = std::any_of(samples.begin(), samples.end(),
                                 [&](const CountSample& s) { return s.label != samples.front().label; });
  if (!mixed) throw InvariantViolation("perceptron training set has a single class");

  double scale = 1.0;
  for (const auto& s : samples) scale = std::max({scale, s.n_normal, s.n_blast});
  struct Row {
    double x0, x1;
    int y;
  };
  std::vector<Row> rows;
  for (const auto& s : samples) rows.push_back({s.n_normal / scale, s.n_blast / scale, s.label == Diagnosis::kAll ? 1 : -1});

  auto correct = [&](const std::array<double, 3>& w) {
    std::size_t c = 0;
    for (const auto& r : rows) {
      const double a = w[0] * r.x0 + w[1] * r.x1 + w[2];
      if ((a > 0 ? 1 : -1) == r.y) ++c;
    }
    return c;
  };

  std::array<double, 3> w{0.0, 0.0, 0.0};
  std::array<double, 3> pocket = w;
  std::size_t pocket_correct = correct(w);
  PerceptronResult result;
  for (int epoch = 0; epoch < max_epochs && pocket_correct < rows.size(); ++epoch) {
    result.epochs_run = epoch + 1;
    bool updated = false;
    for (const auto& r : rows) {
      const double a = w[0] * r.x0 + w[1] * r.x1 + w[2];
      if ((a > 0 ? 1 : -1) == r.y) continue;
      w[0] += r.y * r.x0;
      w[1] += r.y * r.x1;
      w[2] += r.y;
      updated = true;
      const std::size_t c = correct(w);
      if (c > pocket_correct) {
        pocket_correct = c;
        pocket = w;
      }
    }
    if (!updated) break;
  }
  result.weights = pocket;
  result.accuracy = static_cast<double>(pocket_correct) / static_cast<double>(rows.size());
  return result;
}

std::vector<CountSample> count_samples(const std::vector<PatientBag>& bags, CellClassifier& classifier) {
  std::vector<CountSample> out;
  out.reserve(bags.size());
  for (const auto& bag : bags) {
    CountSample s;
    s.label = bag.diagnosis;
    for (CellClass c : classifier.classify(bag.cells)) {
      (c == CellClass::kBlast ? s.n_blast : s.n_normal) += 1.0;
    }
    out.push_back(s);
  }
  return out;
}

PerceptronResult ideal_perceptron_baseline(const std::vector<PatientBag>& bags, CellClassifier& classifier) {
  return train_perceptron(count_samples(bags, classifier));
}

}  // namespace leukmil::eval
