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

#include "json.hpp"
#include "leukmil/core/types.hpp"

namespace leukmil {

// Box schema shared by the manifest and detection outputs.
nlohmann::json box_to_json(const BoundingBox& box, bool with_score);
BoundingBox box_from_json(const nlohmann::json& j);

// Canonical serialization used for every digest: sorted keys, no whitespace.
inline std::string canonical_dump(const nlohmann::json& j) { return j.dump(); }

}  // namespace leukmil
