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

#include <array>
#include <vector>

#include "leukmil/eval/attack.hpp"

namespace leukmil::eval {

struct CountSample {
  double n_normal = 0;
  double n_blast = 0;
  Diagnosis label = Diagnosis::kHealthy;
};

struct PerceptronResult {
  std::array<double, 3> weights{};  // w_normal, w_blast, bias over max-scaled counts
  double accuracy = 0.0;            // on the training set itself
  int epochs_run = 0;

  nlohmann::json to_json() const;
};

// Pocket perceptron trained and scored on the same samples. Throws
// InvariantViolation when every sample has the same label.
PerceptronResult train_perceptron(const std::vector<CountSample>& samples, int max_epochs = 1000);

std::vector<CountSample> count_samples(const std::vector<PatientBag>& bags, CellClassifier& classifier);

// Per-patient (n_normal, n_blast) from `classifier`, then the perceptron's
// accuracy on that same set.
PerceptronResult ideal_perceptron_baseline(const std::vector<PatientBag>& bags, CellClassifier& classifier);

}  // namespace leukmil::eval
