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

#include "leukmil/cli/config.hpp"

namespace leukmil::cli {

struct ReproResult {
  std::string config_digest;
  std::string bundle_digest;
  nlohmann::json summary;
};

// synth -> train-detector -> stage 1 -> stage 2 -> evaluate (+attacks) ->
// ablate, all under `out`, driven by one top-level seed. The report bundle
// lands in `out/bundle`.
ReproResult run_repro(const ReproConfig& config, const std::filesystem::path& out);

}  // namespace leukmil::cli
