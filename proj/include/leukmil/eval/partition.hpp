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

#include <vector>

#include "leukmil/core/rng.hpp"
#include "leukmil/core/types.hpp"

namespace leukmil::eval {

enum class Remainder { kDiscard };

struct PartitionSpec {
  int partition_size = 50;
  Remainder remainder = Remainder::kDiscard;

  void validate() const;  // ConfigError unless partition_size >= 1
};

// Splits each bag into pseudo-patients of exactly partition_size cells drawn
// from a shuffled copy of its cells; leftovers are discarded. Pseudo-patient
// ids are "<patient_id>/<k>" and inherit the diagnosis. When no bag is large
// enough the result is empty and a warning is logged.
std::vector<PatientBag> partition_patients(const std::vector<PatientBag>& bags, const PartitionSpec& spec, Rng& rng);

}  // namespace leukmil::eval
