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

#include "leukmil/eval/partition.hpp"

#include "leukmil/core/error.hpp"
#include "leukmil/core/log.hpp"

namespace leukmil::eval {

void PartitionSpec::validate() const {
  if (partition_size < 1) throw ConfigError("partition size must be >= 1, got " + std::to_string(partition_size));
}

std::vector<PatientBag> partition_patients(const std::vector<PatientBag>& bags, const PartitionSpec& spec, Rng& rng) {
  spec.validate();
  const auto k = static_cast<std::size_t>(spec.partition_size);
  std::vector<PatientBag> out;
  for (const auto& bag : bags) {
    std::vector<std::size_t> order(bag.cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t part = 0; (part + 1) * k <= order.size(); ++part) {
      PatientBag p;
      p.patient_id = bag.patient_id + "/" + std::to_string(part);
      p.diagnosis = bag.diagnosis;
      p.cells.reserve(k);
      for (std::size_t i = part * k; i < (part + 1) * k; ++i) p.cells.push_back(bag.cells[order[i]]);
      out.push_back(std::move(p));
    }
  }
  if (out.empty()) {
    log::warn("partition_empty", {{"partition_size", spec.partition_size}, {"bags", bags.size()}});
  }
  return out;
}

}  // namespace leukmil::eval
