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

#include "leukmil/model/classifier.hpp"

namespace leukmil::model {

nlohmann::json ModelConfig::to_json() const {
  return {{"feature_dim", feature_dim},
          {"activation", std::string(features::to_string(activation))},
          {"mask_skip", mask_skip},
          {"hidden", kHiddenDim},
          {"patient_dim", kPatientDim}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.activation = features::parse_activation(j.value("activation", std::string("relu")));
  c.mask_skip = j.value("mask_skip", false);
  if (j.value("hidden", kHiddenDim) != kHiddenDim || j.value("patient_dim", kPatientDim) != kPatientDim) {
    throw FormatError("aggregator checkpoint has unsupported layer sizes");
  }
  return c;
}

}  // namespace leukmil::model
