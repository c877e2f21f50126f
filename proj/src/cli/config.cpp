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

#include "leukmil/cli/config.hpp"

#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/json_util.hpp"

namespace leukmil::cli {

std::string RunConfig::digest() const { return sha256_hex(canonical_dump(to_json())); }

std::string_view to_string(Budget b) { return b == Budget::kDesk ? "desk" : "full"; }

Budget parse_budget(std::string_view s) {
  if (s == "desk") return Budget::kDesk;
  if (s == "full") return Budget::kFull;
  throw ConfigError("unknown budget '" + std::string(s) + "' (expected desk or full)");
}

nlohmann::json CorpusSpec::to_json() const {
  return {{"synth", synth.to_json()},
          {"n_all", options.n_all},
          {"n_healthy", options.n_healthy},
          {"images_min", options.images_min},
          {"images_max", options.images_max},
          {"test_fraction", options.test_fraction}};
}

CorpusSpec CorpusSpec::from_json(const nlohmann::json& j) {
  CorpusSpec c;
  if (j.contains("synth")) c.synth = synth::SynthConfig::from_json(j.at("synth"));
  c.options.n_all = j.value("n_all", c.options.n_all);
  c.options.n_healthy = j.value("n_healthy", c.options.n_healthy);
  c.options.images_min = j.value("images_min", c.options.images_min);
  c.options.images_max = j.value("images_max", c.options.images_max);
  c.options.test_fraction = j.value("test_fraction", c.options.test_fraction);
  return c;
}

ReproConfig ReproConfig::for_budget(Budget budget, std::uint64_t seed) {
  ReproConfig c;
  c.budget = budget;
  c.seed = seed;
  c.detector.class_map = detect::ClassMap::kBlastNormal;
  c.corpus.options = {50, 50, 2, 4, 0.3};
  c.sweep.synth.blast_fraction = 0.03;
  c.sweep.options = {12, 12, 24, 28, 0.5};
  c.ablation = eval::AblationConfig::desk();
  if (budget == Budget::kFull) {
    c.corpus.options = {100, 100, 3, 6, 0.3};
    c.sweep.options = {25, 25, 24, 28, 0.5};
    c.ablation = eval::AblationConfig{};
    c.ablation.backbones.clear();
    for (const auto& spec : features::backbone_registry()) c.ablation.backbones.push_back(spec.name);
  }
  c.ablation.predict = c.predict;
  return c;
}

nlohmann::json ReproConfig::to_json() const {
  return {{"budget", std::string(to_string(budget))},
          {"seed", seed},
          {"corpus", corpus.to_json()},
          {"sweep", sweep.to_json()},
          {"detector", detector.to_json()},
          {"backbone", backbone},
          {"stage1", stage1.to_json()},
          {"stage2", stage2.to_json()},
          {"predict",
           {{"packing", std::string(baggen::to_string(predict.packing))},
            {"length", predict.length},
            {"aggregation", std::string(model::to_string(predict.aggregation))}}},
          {"attack_group_sizes", attack_group_sizes},
          {"ablation", ablation.to_json()},
          {"weights_dir", weights_dir ? nlohmann::json(weights_dir->string()) : nlohmann::json()}};
}

std::string ReproConfig::digest() const { return sha256_hex(canonical_dump(to_json())); }

}  // namespace leukmil::cli
