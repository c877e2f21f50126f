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

#include "leukmil/cli/repro.hpp"

#include <chrono>
#include <fstream>
#include <map>

#include "leukmil/baggen/pools.hpp"
#include "leukmil/core/checkpoint.hpp"
#include "leukmil/core/log.hpp"
#include "leukmil/core/metrics.hpp"
#include "leukmil/detect/average_precision.hpp"
#include "leukmil/eval/bags.hpp"

namespace leukmil::cli {

namespace {

class Stopwatch {
 public:
  explicit Stopwatch(std::string stage) : stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    log::info("stage_start", {{"stage", stage_}});
  }
  ~Stopwatch() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    log::info("stage_done", {{"stage", stage_}, {"seconds", s}});
  }

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

// Single-cell confusion with BLAST in the positive slot.
MetricsReport cell_metrics(const model::AggregatorClassifier<float>& m, const baggen::CellPools& pools,
                           model::FeatureCache& cache) {
  std::vector<Diagnosis> predicted, actual;
  for (const auto* pool : {&pools.blast, &pools.normal}) {
    const auto probs = model::cell_probabilities(m, *pool, cache);
    for (double p : probs) predicted.push_back(model::decide(p));
    actual.insert(actual.end(), pool->size(), pool == &pools.blast ? Diagnosis::kAll : Diagnosis::kHealthy);
  }
  MetricsReport r = compute_metrics(tally(predicted, actual));
  r.extra = {{"positive_class", "BLAST"}, {"cells", predicted.size()}};
  return r;
}

MetricsReport attack_report(const eval::AttackRow& row) {
  Confusion c;
  c.tp = static_cast<std::int64_t>(row.predicted_all);
  c.fn = static_cast<std::int64_t>(row.all_bags - row.predicted_all);
  MetricsReport r = compute_metrics(c);
  r.extra = {{"attack", std::string(eval::to_string(row.mode))},
             {"group_size", row.group_size},
             {"emptied", row.emptied},
             {"recall", eval::optional_json(row.recall)}};
  return r;
}

}  // namespace

ReproResult run_repro(const ReproConfig& config, const std::filesystem::path& out) {
  const std::string digest = config.digest();
  const Rng root(config.seed);
  std::filesystem::create_directories(out);
  {
    std::ofstream cfg(out / "config.json");
    cfg << nlohmann::json{{"config_digest", digest}, {"config", config.to_json()}}.dump(2) << '\n';
  }
  nlohmann::json summary;

  DatasetManifest corpus, sweep;
  {
    Stopwatch w("synth");
    Rng r = root.derive(seed_offset::kSynth);
    corpus = synth::generate_corpus(config.corpus.synth, config.corpus.options, out / "corpus", r);
    Rng rs = root.derive(seed_offset::kSynth + 1);
    sweep = synth::generate_corpus(config.sweep.synth, config.sweep.options, out / "sweep", rs);
    summary["corpus"] = {{"images", corpus.records.size()}, {"patients", corpus.patients().size()},
                         {"sweep_images", sweep.records.size()}, {"sweep_patients", sweep.patients().size()}};
  }

  std::unique_ptr<detect::TwoStageDetector> detector;
  {
    Stopwatch w("train-detector");
    Rng r = root.derive(seed_offset::kDetector);
    detect::TrainedDetector trained = detect::train_detector(corpus, config.detector, r);
    Checkpoint ckpt = trained.model.to_checkpoint();
    ckpt.config_digest = digest;
    save_checkpoint(ckpt, out / "detector.ckpt");
    detector = std::make_unique<detect::TwoStageDetector>(std::move(trained.model));
    const auto map = detect::evaluate_map(*detector, corpus, Split::kTest);
    const auto oracle = detect::oracle_detector(corpus, config.detector.class_map);
    const auto oracle_map = detect::evaluate_map(*oracle, corpus, Split::kTest);
    summary["detector"] = {{"train", trained.summary.to_json()},
                           {"test_map", map.to_json()},
                           {"oracle_test_map", oracle_map.map}};
  }

  const baggen::CellPools pools = baggen::pools_from_manifest(corpus, Split::kTrain, config.corpus.synth.crop_size);
  const baggen::CellPools test_pools = baggen::pools_from_manifest(corpus, Split::kTest, config.corpus.synth.crop_size);
  baggen::save_pools(pools, out / "pools");
  const features::FeatureExtractor extractor = features::FeatureExtractor::create(config.backbone, config.weights_dir);
  model::FeatureCache cache(extractor);
  std::vector<MetricsReport> main_reports;
  std::map<std::string, eval::PlotData> main_plots;

  eval::TrainedPipeline pipeline;
  {
    Stopwatch w("train");
    Rng r = root.derive(seed_offset::kStage1);
    pipeline = eval::train_pipeline(pools, config.stage1, config.stage2, extractor, r);
    save_checkpoint(pipeline.stage1->checkpoint, out / "stage1.ckpt");
    save_checkpoint(pipeline.final.checkpoint, out / "stage2.ckpt");
    MetricsReport cells = cell_metrics(pipeline.stage1->model, test_pools, cache);
    cells.extra["training"] = pipeline.stage1->summary();
    summary["stage1_test_cell_accuracy"] = *cells.accuracy;
    summary["stage1_val_accuracy"] = pipeline.stage1->val_accuracy;
    summary["stage2_val_accuracy"] = pipeline.final.val_accuracy;
    summary["extractor_frozen"] = pipeline.stage1->extractor_digest_before == pipeline.final.extractor_digest_after &&
                                  pipeline.final.extractor_digest_before == pipeline.final.extractor_digest_after;
    main_reports.push_back(eval::named_report(cells, "stage1/test_cells", config.seed, digest));
  }

  eval::BagSet oracle_bags, detector_bags, sweep_bags;
  {
    Stopwatch w("evaluate");
    const auto oracle = detect::oracle_detector(corpus, detect::ClassMap::kBlastNormal);
    oracle_bags = eval::build_bags(corpus, Split::kTest, *oracle);
    detector_bags = eval::build_bags(corpus, Split::kTest, *detector);
    const auto sweep_oracle = detect::oracle_detector(sweep, detect::ClassMap::kBlastNormal);
    sweep_bags = eval::build_bags(sweep, std::nullopt, *sweep_oracle);

    const auto& m = pipeline.final.model;
    for (const auto* set : {&oracle_bags, &detector_bags}) {
      const bool is_oracle = set == &oracle_bags;
      const auto preds = eval::predict_bags(m, set->bags, cache, config.predict);
      MetricsReport rep = eval::patient_metrics(preds, set->bags);
      nlohmann::json per_patient = nlohmann::json::array();
      for (const auto& p : preds) per_patient.push_back(p.to_json());
      rep.extra = {{"detector", is_oracle ? "oracle" : "trained"},
                   {"detections", set->detections},
                   {"predictions", per_patient}};
      summary[is_oracle ? "patient_accuracy_oracle" : "patient_accuracy_detector"] = *rep.accuracy;
      main_reports.push_back(eval::named_report(rep, is_oracle ? "evaluate/oracle" : "evaluate/detector", config.seed, digest));
    }

    const std::vector<eval::AttackMode> modes{eval::AttackMode::kNone, eval::AttackMode::kRemoveBlast,
                                              eval::AttackMode::kRemoveNormal};
    const std::vector<int> whole{0};
    eval::GroundTruthClassifier gt;
    Rng ra = root.derive(seed_offset::kEval);
    const auto gt_table = eval::run_attack_experiment(m, oracle_bags.bags, modes, whole, gt, cache, ra, config.predict);
    eval::DetectionLabelTable labels = detector_bags.detector_labels;
    const auto det_table =
        eval::run_attack_experiment(m, detector_bags.bags, modes, whole, labels, cache, ra, config.predict);
    const auto sweep_table = eval::run_attack_experiment(m, sweep_bags.bags, modes, config.attack_group_sizes, gt,
                                                         cache, ra, config.predict);
    for (const auto* t : {&gt_table, &det_table}) {
      for (const auto& row : t->rows) {
        main_reports.push_back(eval::named_report(attack_report(row),
                                            "attack/" + std::string(eval::to_string(t->source)) + "/" +
                                                std::string(eval::to_string(row.mode)),
                                            config.seed, digest));
      }
    }
    eval::PlotData fig{"Recall under attack by group size", "group size", "recall", {}};
    for (const auto& row : sweep_table.rows) {
      if (row.recall) fig.add(row.group_size, std::string(eval::to_string(row.mode)), *row.recall);
    }
    main_plots["attack_group_size"] = fig;
    summary["attacks_gt"] = gt_table.to_json();
    summary["attacks_detector"] = det_table.to_json();
    summary["attacks_group_size"] = sweep_table.to_json();
  }

  eval::ReportBundle bundle;
  {
    Stopwatch w("ablate");
    eval::AblationInputs inputs;
    inputs.pools = &pools;
    inputs.test_bags = &oracle_bags.bags;
    inputs.sweep_bags = &sweep_bags.bags;
    inputs.sweep_model = &pipeline.final.model;
    inputs.extractor = &extractor;
    eval::AblationConfig ablation = config.ablation;
    ablation.weights_dir = config.weights_dir;
    bundle = eval::run_ablations(ablation, inputs, root.derive(seed_offset::kAblation).next_u64());
  }
  for (auto& r : main_reports) bundle.add(std::move(r));
  for (auto& [name, plot] : main_plots) bundle.add_plot(name, std::move(plot));
  for (auto it = summary.begin(); it != summary.end(); ++it) bundle.summary()[it.key()] = it.value();
  bundle.summary()["repro_config_digest"] = digest;

  ReproResult result;
  result.config_digest = digest;
  result.bundle_digest = bundle.write(out / "bundle", digest);
  result.summary = bundle.summary();
  log::info("repro_done", {{"config_digest", digest}, {"bundle_digest", result.bundle_digest}});
  return result;
}

}  // namespace leukmil::cli
