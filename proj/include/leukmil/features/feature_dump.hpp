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

#include <filesystem>
#include <string>
#include <vector>

#include "leukmil/nn/tensor.hpp"

namespace leukmil::features {

// Row-major float32 features on disk: `<stem>.bin` holds the raw array and
// `<stem>.json` the sidecar {shape, dtype, backbone, digest, ids}.
struct FeatureDump {
  std::string backbone;
  std::string digest;
  std::vector<std::string> ids;  // one per row
  nn::RowMatrixF features;
};

void write_feature_dump(const FeatureDump& dump, const std::filesystem::path& stem);
FeatureDump read_feature_dump(const std::filesystem::path& stem);

}  // namespace leukmil::features
