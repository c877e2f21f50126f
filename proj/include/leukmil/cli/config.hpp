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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "leukmil/detect/train.hpp"
#include "leukmil/eval/experiments.hpp"
#include "leukmil/synth/generator.hpp"

namespace leukmil::cli {

// Exit codes: usage and configuration problems are 2, runtime failures 1.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Every option of one invocation. Its digest is stamped on each artifact.
struct RunConfig {
  std::string subcommand;
  nlohmann::json options = nlohmann::json::object();

  nlohmann::json to_json() const { return {{"subcommand", subcommand}, {"options", options}}; }
  std::string digest() const;
};

enum class Budget { kDesk, kFull };
std::string_view to_string(Budget b);
Budget parse_budget(std::string_view s);

struct CorpusSpec {
  synth::SynthConfig synth;
  synth::CorpusOptions options;

  nlohmann::json to_json() const;
  static CorpusSpec from_json(const nlohmann::json& j);
};

// Everything `repro` needs. Output paths are not part of it, so two runs into
// different directories share a digest.
struct ReproConfig {
  Budget budget = Budget::kDesk;
  std::uint64_t seed = 0;
  CorpusSpec corpus;
  CorpusSpec sweep;  // large low-blast bags for the group-size sweep
  detect::DetectorTrainConfig detector;
  std::string backbone = "toy_cnn";
  model::TrainConfig stage1 = model::TrainConfig::stage1();
  model::TrainConfig stage2 = model::TrainConfig::stage2();
  model::PredictOptions predict;
  std::vector<int> attack_group_sizes{20, 40, 60, 80, 100};
  eval::AblationConfig ablation;
  std::optional<std::filesystem::path> weights_dir;

  static ReproConfig for_budget(Budget budget, std::uint64_t seed);
  nlohmann::json to_json() const;
  std::string digest() const;
};

}  // namespace leukmil::cli
