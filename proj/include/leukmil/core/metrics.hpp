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

#include "leukmil/core/report.hpp"
#include "leukmil/core/types.hpp"

namespace leukmil {

// ALL is the positive class. Throws InvariantViolation on an empty
// confusion or a negative count. Ratios with a zero denominator are absent;
// macro-F1 is absent unless both per-class F1 scores are defined.
MetricsReport compute_metrics(const Confusion& confusion);

// Confusion of paired predicted/actual diagnoses.
Confusion tally(std::span<const Diagnosis> predicted, std::span<const Diagnosis> actual);

}  // namespace leukmil
