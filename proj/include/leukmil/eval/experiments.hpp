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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leukmil/core/report.hpp"
#include "leukmil/eval/attack.hpp"
#include "leukmil/eval/metrics.hpp"
#include "leukmil/eval/plot.hpp"
#include "leukmil/model/training.hpp"

namespace leukmil::eval {

// Reports and plots written together; the bundle digest covers every report's
// content digest and the summary, never wall-clock fields.
class ReportBundle {
 public:
  void add(MetricsReport report);
  void add_plot(const std::string& name, PlotData plot) { plots_[name] = std::move(plot); }
  void record_failure(const std::string& name, const std::string& what);
  nlohmann::json& summary() { return summary_; }
  const nlohmann::json& summary() const { return summary_; }
  const std::vector<MetricsReport>& reports() const { return reports_; }
  const MetricsReport* find(const std::string& name) const;

  std::string digest() const;
  // Writes bundle.json, reports/<name>.json and plots/<name>.{csv,png}.
  // Returns the bundle digest.
  std::string write(const std::filesystem::path& dir, const std::string& config_digest, bool render_png = true) const;

 private:
  std::vector<MetricsReport> reports_;
  std::map<std::string, PlotData> plots_;
  nlohmann::json failures_ = nlohmann::json::array();
  nlohmann::json summary_ = nlohmann::json::object();
};

struct TrainedPipeline {
  std::optional<model::TrainOutcome> stage1;  // absent when pretraining is skipped
  model::TrainOutcome final;                  // stage 2, or stage 1 when stage 2 is skipped
};

// Stage 1 then stage 2. `pretrain = false` starts stage 2 from random init;
// `run_stage2 = false` stops after stage 1.
TrainedPipeline train_pipeline(const baggen::CellPools& pools, const model::TrainConfig& stage1,
                               const model::TrainConfig& stage2, const features::FeatureExtractor& extractor,
                               Rng& rng, bool pretrain = true, bool run_stage2 = true);

std::vector<model::PatientPrediction> predict_bags(const model::AggregatorClassifier<float>& model,
                                                   const std::vector<PatientBag>& bags, model::FeatureCache& cache,
                                                   const model::PredictOptions& options = {});

struct AblationConfig {
  std::vector<int> group_sizes{20, 30, 40, 50, 60, 70, 80, 90, 100};
  int group_repeats = 5;  // partition draws per group size
  std::vector<std::string> backbones{"toy_cnn"};
  std::vector<int> lengths{1, 2, 4, 8, 16, 32};
  int seeds = 5;  // pretraining / attack / perceptron study
  std::vector<AttackMode> attacks{AttackMode::kNone, AttackMode::kRemoveBlast, AttackMode::kRemoveNormal};
  model::TrainConfig stage1 = model::TrainConfig::stage1();
  model::TrainConfig stage2 = model::TrainConfig::stage2();
  model::PredictOptions predict;
  std::optional<std::filesystem::path> weights_dir;

  bool run_group_sizes = true;
  bool run_backbones = true;
  bool run_lengths = true;
  bool run_seed_study = true;

  nlohmann::json to_json() const;
  static AblationConfig from_json(const nlohmann::json& j);
  // Desk-scale grid: toy backbone only, smaller validation draws.
  static AblationConfig desk();
  std::string digest() const;
};

struct AblationInputs {
  const baggen::CellPools* pools = nullptr;            // training pools
  const std::vector<PatientBag>* test_bags = nullptr;  // held-out patients
  const std::vector<PatientBag>* sweep_bags = nullptr;  // large bags for the group-size sweep
  // Model used for the group-size sweep; trained from the grid budget when null.
  const model::AggregatorClassifier<float>* sweep_model = nullptr;
  // Extractor for the seed study and the sweep; built from backbones[0] when null.
  const features::FeatureExtractor* extractor = nullptr;
};

// Runs every enabled grid. A failed grid cell is recorded and skipped.
// Summary keys: group_size_spearman, pretraining, attacks, perceptron, lengths.
ReportBundle run_ablations(const AblationConfig& config, const AblationInputs& inputs, std::uint64_t seed);

// Named report with seed and digest filled in.
MetricsReport named_report(MetricsReport metrics, const std::string& name, std::uint64_t seed,
                           const std::string& config_digest);

}  // namespace leukmil::eval
