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

#include "leukmil/eval/experiments.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <set>

#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/json_util.hpp"
#include "leukmil/core/log.hpp"
#include "leukmil/eval/partition.hpp"
#include "leukmil/eval/perceptron.hpp"

namespace leukmil::eval {

void ReportBundle::add(MetricsReport report) {
  if (report.config_digest.empty()) throw InvariantViolation("report '" + report.name + "' has no config digest");
  if (find(report.name) != nullptr) throw InvariantViolation("duplicate report '" + report.name + "'");
  reports_.push_back(std::move(report));
}

void ReportBundle::record_failure(const std::string& name, const std::string& what) {
  log::warn("grid_cell_failed", {{"cell", name}, {"error", what}});
  failures_.push_back({{"cell", name}, {"error", what}});
}

const MetricsReport* ReportBundle::find(const std::string& name) const {
  for (const auto& r : reports_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::string ReportBundle::digest() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports_) j.push_back({r.name, r.content_digest()});
  return sha256_hex(canonical_dump({{"reports", j}, {"summary", summary_}, {"failures", failures_}}));
}

namespace {

std::string file_stem(std::string name) {
  for (char& c : name) {
    if (c == '/' || c == ' ') c = '_';
  }
  return name;
}

}  // namespace

std::string ReportBundle::write(const std::filesystem::path& dir, const std::string& config_digest,
                                bool render_png) const {
  std::filesystem::create_directories(dir / "reports");
  std::filesystem::create_directories(dir / "plots");
  nlohmann::json index = nlohmann::json::array();
  for (const auto& r : reports_) {
    const std::string file = "reports/" + file_stem(r.name) + ".json";
    r.save(dir / file);
    index.push_back({{"name", r.name}, {"file", file}, {"content_digest", r.content_digest()}});
  }
  nlohmann::json plots = nlohmann::json::array();
  for (const auto& [name, plot] : plots_) {
    const std::string stem = "plots/" + file_stem(name);
    write_plot_csv(plot, config_digest, dir / (stem + ".csv"));
    if (render_png && !plot.points.empty()) render_plot_png(plot, dir / (stem + ".png"));
    plots.push_back(stem + ".csv");
  }
  const std::string bundle_digest = digest();
  std::ofstream out(dir / "bundle.json");
  out << nlohmann::json{{"config_digest", config_digest},
                        {"bundle_digest", bundle_digest},
                        {"reports", index},
                        {"plots", plots},
                        {"failures", failures_},
                        {"summary", summary_}}
             .dump(2)
      << '\n';
  if (!out) throw IoError("cannot write '" + (dir / "bundle.json").string() + "'");
  return bundle_digest;
}

TrainedPipeline train_pipeline(const baggen::CellPools& pools, const model::TrainConfig& stage1,
                               const model::TrainConfig& stage2, const features::FeatureExtractor& extractor,
                               Rng& rng, bool pretrain, bool run_stage2) {
  TrainedPipeline out;
  Rng r1 = rng.derive(seed_offset::kStage1);
  Rng r2 = rng.derive(seed_offset::kStage2);
  if (pretrain || !run_stage2) {
    out.stage1 = model::train_stage1(pools, stage1, extractor, r1);
    if (!run_stage2) {
      out.final = *out.stage1;
      return out;
    }
    out.final = model::train_stage2(pools, stage2, &out.stage1->checkpoint, extractor, r2);
  } else {
    model::TrainConfig cold = stage2;
    cold.allow_random_init = true;
    out.final = model::train_stage2(pools, cold, nullptr, extractor, r2);
  }
  return out;
}

std::vector<model::PatientPrediction> predict_bags(const model::AggregatorClassifier<float>& model,
                                                   const std::vector<PatientBag>& bags, model::FeatureCache& cache,
                                                   const model::PredictOptions& options) {
  std::vector<model::PatientPrediction> out;
  out.reserve(bags.size());
  for (const auto& b : bags) out.push_back(model::predict_or_no_evidence(model, b, cache, options));
  return out;
}

MetricsReport named_report(MetricsReport metrics, const std::string& name, std::uint64_t seed,
                           const std::string& config_digest) {
  metrics.name = name;
  metrics.seed = seed;
  metrics.config_digest = config_digest;
  if (metrics.started_at.empty()) metrics.started_at = utc_timestamp();
  metrics.finished_at = utc_timestamp();
  return metrics;
}

nlohmann::json AblationConfig::to_json() const {
  nlohmann::json atk = nlohmann::json::array();
  for (auto a : attacks) atk.push_back(std::string(eval::to_string(a)));
  return {{"group_sizes", group_sizes},
          {"group_repeats", group_repeats},
          {"backbones", backbones},
          {"lengths", lengths},
          {"seeds", seeds},
          {"attacks", atk},
          {"stage1", stage1.to_json()},
          {"stage2", stage2.to_json()},
          {"predict",
           {{"packing", std::string(baggen::to_string(predict.packing))},
            {"length", predict.length},
            {"aggregation", std::string(model::to_string(predict.aggregation))}}},
          {"weights_dir", weights_dir ? nlohmann::json(weights_dir->string()) : nlohmann::json()},
          {"run_group_sizes", run_group_sizes},
          {"run_backbones", run_backbones},
          {"run_lengths", run_lengths},
          {"run_seed_study", run_seed_study}};
}

AblationConfig AblationConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"group_sizes", "group_repeats", "backbones", "lengths", "seeds",
                                           "attacks", "stage1", "stage2", "predict", "weights_dir",
                                           "run_group_sizes", "run_backbones", "run_lengths", "run_seed_study",
                                           "budget"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown ablation grid key '" + key + "'");
  }
  AblationConfig c = j.value("budget", std::string("desk")) == "desk" ? desk() : AblationConfig{};
  c.group_sizes = j.value("group_sizes", c.group_sizes);
  c.group_repeats = j.value("group_repeats", c.group_repeats);
  c.backbones = j.value("backbones", c.backbones);
  c.lengths = j.value("lengths", c.lengths);
  c.seeds = j.value("seeds", c.seeds);
  if (j.contains("attacks")) {
    c.attacks.clear();
    for (const auto& a : j.at("attacks")) c.attacks.push_back(parse_attack_mode(a.get<std::string>()));
  }
  if (j.contains("stage1")) c.stage1 = model::TrainConfig::from_json(j.at("stage1"));
  if (j.contains("stage2")) c.stage2 = model::TrainConfig::from_json(j.at("stage2"));
  if (j.contains("predict")) {
    const auto& p = j.at("predict");
    c.predict.packing = baggen::parse_packing(p.value("packing", std::string("chunk")));
    c.predict.length = p.value("length", c.predict.length);
    c.predict.aggregation = model::parse_aggregation(p.value("aggregation", std::string("max")));
  }
  if (j.contains("weights_dir") && !j.at("weights_dir").is_null()) c.weights_dir = j.at("weights_dir").get<std::string>();
  c.run_group_sizes = j.value("run_group_sizes", c.run_group_sizes);
  c.run_backbones = j.value("run_backbones", c.run_backbones);
  c.run_lengths = j.value("run_lengths", c.run_lengths);
  c.run_seed_study = j.value("run_seed_study", c.run_seed_study);
  if (c.group_repeats < 1 || c.seeds < 1) throw ConfigError("group_repeats and seeds must be >= 1");
  for (int g : c.group_sizes) {
    if (g < 1) throw ConfigError("group sizes must be >= 1");
  }
  for (int l : c.lengths) {
    if (l < 1) throw ConfigError("training lengths must be >= 1");
  }
  return c;
}

AblationConfig AblationConfig::desk() {
  AblationConfig c;
  c.stage2.validation_sequences = 256;
  return c;
}

std::string AblationConfig::digest() const { return sha256_hex(canonical_dump(to_json())); }

namespace {

model::TrainConfig stage2_at_length(model::TrainConfig base, int length) {
  base.length = length;
  base.cell_range = {std::max(1, static_cast<int>(std::lround(length / 3.0))), length};
  return base;
}

struct Runner {
  const AblationConfig& config;
  const AblationInputs& inputs;
  std::uint64_t seed;
  std::string digest;
  Rng base;
  ReportBundle bundle;

  std::unique_ptr<features::FeatureExtractor> owned_extractor;
  const features::FeatureExtractor* extractor = nullptr;
  std::unique_ptr<model::FeatureCache> cache;
  std::optional<model::AggregatorClassifier<float>> first_seed_model;

  Runner(const AblationConfig& c, const AblationInputs& in, std::uint64_t s)
      : config(c), inputs(in), seed(s), digest(c.digest()), base(Rng(s).derive(seed_offset::kAblation)) {}

  void setup() {
    if (inputs.pools == nullptr || inputs.test_bags == nullptr) {
      throw ConfigError("ablations need training pools and test bags");
    }
    extractor = inputs.extractor;
    if (extractor == nullptr) {
      if (config.backbones.empty()) throw ConfigError("ablations need a backbone");
      owned_extractor = std::make_unique<features::FeatureExtractor>(
          features::FeatureExtractor::create(config.backbones.front(), config.weights_dir));
      extractor = owned_extractor.get();
    }
    cache = std::make_unique<model::FeatureCache>(*extractor);
  }

  MetricsReport evaluate(const model::AggregatorClassifier<float>& m, model::FeatureCache& c,
                         const std::vector<PatientBag>& bags, const model::PredictOptions& options) {
    const auto preds = predict_bags(m, bags, c, options);
    return patient_metrics(preds, bags);
  }

  void seed_study() {
    std::vector<double> with_acc, without_acc, rec_none, rec_blast, rec_normal, perc_acc, lstm_acc;
    bool identity = true;
    nlohmann::json per_seed = nlohmann::json::array();
    const auto& test = *inputs.test_bags;
    for (int s = 0; s < config.seeds; ++s) {
      const std::uint64_t run_seed = Rng(seed).derive(seed_offset::kAblation + 100 + s).next_u64();
      nlohmann::json row = {{"seed_index", s}, {"seed", run_seed}};
      try {
        Rng rw(run_seed);
        TrainedPipeline with = train_pipeline(*inputs.pools, config.stage1, config.stage2, *extractor, rw, true);
        Rng rc(run_seed);
        TrainedPipeline without = train_pipeline(*inputs.pools, config.stage1, config.stage2, *extractor, rc, false);
        MetricsReport mw = evaluate(with.final.model, *cache, test, config.predict);
        MetricsReport mo = evaluate(without.final.model, *cache, test, config.predict);
        mw.extra = {{"stage1", with.stage1->summary()}, {"stage2", with.final.summary()}};
        mo.extra = {{"stage2", without.final.summary()}};
        with_acc.push_back(*mw.accuracy);
        without_acc.push_back(*mo.accuracy);
        row["accuracy_with_pretraining"] = *mw.accuracy;
        row["accuracy_without_pretraining"] = *mo.accuracy;
        row["stage1_val_accuracy"] = with.stage1->val_accuracy;
        bundle.add(named_report(mw, "pretraining/with/seed" + std::to_string(s), run_seed, digest));
        bundle.add(named_report(mo, "pretraining/without/seed" + std::to_string(s), run_seed, digest));

        GroundTruthClassifier gt;
        for (const auto& b : test) {
          const auto rb = apply_attack(b, {AttackMode::kRemoveBlast, ClassSource::kGroundTruth}, &gt);
          const auto rn = apply_attack(b, {AttackMode::kRemoveNormal, ClassSource::kGroundTruth}, &gt);
          if (rb.bag.cells.size() + rn.bag.cells.size() != b.cells.size()) identity = false;
        }
        Rng ra(run_seed);
        const std::vector<int> whole{0};
        const AttackTable table =
            run_attack_experiment(with.final.model, test, config.attacks, whole, gt, *cache, ra, config.predict);
        row["attacks"] = table.to_json();
        auto recall_of = [&](AttackMode m) {
          const AttackRow* r = table.find(0, m);
          return r && r->recall ? *r->recall : std::nan("");
        };
        rec_none.push_back(recall_of(AttackMode::kNone));
        rec_blast.push_back(recall_of(AttackMode::kRemoveBlast));
        rec_normal.push_back(recall_of(AttackMode::kRemoveNormal));

        ModelCellClassifier cells(with.stage1->model, *cache);
        const PerceptronResult perc = ideal_perceptron_baseline(test, cells);
        perc_acc.push_back(perc.accuracy);
        lstm_acc.push_back(*mw.accuracy);
        row["perceptron"] = perc.to_json();
        if (s == 0) first_seed_model = with.final.model;
      } catch (const Error& e) {
        bundle.record_failure("seed_study/seed" + std::to_string(s), e.what());
      }
      per_seed.push_back(row);
    }
    bundle.summary()["pretraining"] = {{"with", to_json(mean_std(with_acc))},
                                       {"without", to_json(mean_std(without_acc))}};
    bundle.summary()["attacks"] = {{"class_source", "gt"},
                                   {"none", to_json(mean_std(rec_none))},
                                   {"remove_blast", to_json(mean_std(rec_blast))},
                                   {"remove_normal", to_json(mean_std(rec_normal))},
                                   {"cardinality_identity", identity}};
    bundle.summary()["perceptron"] = {{"perceptron", to_json(mean_std(perc_acc))},
                                      {"recurrent", to_json(mean_std(lstm_acc))}};
    bundle.summary()["seed_study"] = per_seed;

    PlotData plot{"Stage-1 pretraining", "seed", "patient accuracy", {}};
    for (std::size_t i = 0; i < with_acc.size(); ++i) {
      plot.add(static_cast<double>(i), "with", with_acc[i]);
      plot.add(static_cast<double>(i), "without", without_acc[i]);
    }
    bundle.add_plot("pretraining", plot);
    PlotData atk{"Recall under attack", "seed", "recall", {}};
    for (std::size_t i = 0; i < rec_none.size(); ++i) {
      atk.add(static_cast<double>(i), "none", rec_none[i]);
      atk.add(static_cast<double>(i), "remove-blast", rec_blast[i]);
      atk.add(static_cast<double>(i), "remove-normal", rec_normal[i]);
    }
    bundle.add_plot("attacks", atk);
  }

  void group_sizes() {
    const auto* bags = inputs.sweep_bags ? inputs.sweep_bags : inputs.test_bags;
    const model::AggregatorClassifier<float>* m = inputs.sweep_model;
    model::FeatureCache* c = cache.get();
    std::unique_ptr<model::FeatureCache> sweep_cache;
    if (m == nullptr) {
      if (!first_seed_model) {
        Rng r(Rng(seed).derive(seed_offset::kAblation + 1).next_u64());
        first_seed_model = train_pipeline(*inputs.pools, config.stage1, config.stage2, *extractor, r).final.model;
      }
      m = &*first_seed_model;
    }
    std::vector<double> sizes, accs;
    PlotData plot{"Group size", "cells per pseudo-patient", "accuracy", {}};
    for (int size : config.group_sizes) {
      const std::string name = "group_size/" + std::to_string(size);
      try {
        Confusion pooled;
        std::vector<double> per_repeat;
        for (int r = 0; r < config.group_repeats; ++r) {
          Rng rp = base.derive(1000 + static_cast<std::uint64_t>(size) * 100 + r);
          const auto parts = partition_patients(*bags, PartitionSpec{size}, rp);
          if (parts.empty()) throw InvariantViolation("no bag holds " + std::to_string(size) + " cells");
          const auto preds = predict_bags(*m, parts, *c, config.predict);
          const MetricsReport rep = patient_metrics(preds, parts);
          per_repeat.push_back(*rep.accuracy);
          pooled.tp += rep.confusion.tp;
          pooled.fp += rep.confusion.fp;
          pooled.tn += rep.confusion.tn;
          pooled.fn += rep.confusion.fn;
        }
        MetricsReport rep = compute_metrics(pooled);
        const MeanStd ms = mean_std(per_repeat);
        rep.extra = {{"group_size", size}, {"accuracy_per_repeat", per_repeat}, {"accuracy", to_json(ms)}};
        bundle.add(named_report(rep, name, seed, digest));
        sizes.push_back(size);
        accs.push_back(ms.mean);
        plot.add(size, "accuracy", ms.mean);
      } catch (const Error& e) {
        bundle.record_failure(name, e.what());
      }
    }
    bundle.summary()["group_size_spearman"] = optional_json(spearman(sizes, accs));
    bundle.summary()["group_size_accuracy"] = accs;
    bundle.add_plot("group_size", plot);
  }

  void backbones() {
    PlotData plot{"Backbones", "backbone index", "accuracy", {}};
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t i = 0; i < config.backbones.size(); ++i) {
      const std::string& name = config.backbones[i];
      const std::string cell = "backbone/" + name;
      try {
        const features::FeatureExtractor* ex = extractor;
        std::unique_ptr<features::FeatureExtractor> own;
        std::unique_ptr<model::FeatureCache> own_cache;
        model::FeatureCache* c = cache.get();
        if (name != extractor->name()) {
          own = std::make_unique<features::FeatureExtractor>(features::FeatureExtractor::create(name, config.weights_dir));
          ex = own.get();
          own_cache = std::make_unique<model::FeatureCache>(*ex);
          c = own_cache.get();
        }
        Rng r(Rng(seed).derive(seed_offset::kAblation + 2).next_u64());
        const TrainedPipeline p = train_pipeline(*inputs.pools, config.stage1, config.stage2, *ex, r);
        MetricsReport rep = evaluate(p.final.model, *c, *inputs.test_bags, config.predict);
        rep.extra = {{"backbone", name}, {"feature_dim", ex->dim()}, {"pretrained", ex->pretrained()}};
        table.push_back({{"backbone", name}, {"accuracy", *rep.accuracy}, {"pretrained", ex->pretrained()}});
        plot.add(static_cast<double>(i), name, *rep.accuracy);
        bundle.add(named_report(rep, cell, seed, digest));
      } catch (const Error& e) {
        bundle.record_failure(cell, e.what());
      }
    }
    bundle.summary()["backbones"] = table;
    bundle.add_plot("backbones", plot);
  }

  void lengths() {
    PlotData plot{"Training length", "sequence length", "accuracy", {}};
    nlohmann::json table = nlohmann::json::array();
    for (int length : config.lengths) {
      const std::string cell = "length/" + std::to_string(length);
      try {
        Rng r(Rng(seed).derive(seed_offset::kAblation + 3).next_u64());
        const TrainedPipeline p = train_pipeline(*inputs.pools, config.stage1, stage2_at_length(config.stage2, length),
                                                 *extractor, r, true, length > 1);
        model::PredictOptions own = config.predict;
        own.length = length;
        MetricsReport rep = evaluate(p.final.model, *cache, *inputs.test_bags, own);
        model::PredictOptions at_default = config.predict;
        at_default.length = baggen::kDefaultSequenceLength;
        const MetricsReport at15 = evaluate(p.final.model, *cache, *inputs.test_bags, at_default);
        rep.extra = {{"train_length", length},
                     {"eval_length", length},
                     {"accuracy_at_length_15", *at15.accuracy}};
        table.push_back({{"length", length}, {"accuracy", *rep.accuracy}, {"accuracy_at_length_15", *at15.accuracy}});
        plot.add(length, "own length", *rep.accuracy);
        plot.add(length, "length 15", *at15.accuracy);
        bundle.add(named_report(rep, cell, seed, digest));
      } catch (const Error& e) {
        bundle.record_failure(cell, e.what());
      }
    }
    bundle.summary()["lengths"] = table;
    bundle.add_plot("lengths", plot);
  }
};

}  // namespace

ReportBundle run_ablations(const AblationConfig& config, const AblationInputs& inputs, std::uint64_t seed) {
  Runner runner(config, inputs, seed);
  runner.setup();
  if (config.run_seed_study) runner.seed_study();
  if (config.run_group_sizes) runner.group_sizes();
  if (config.run_backbones) runner.backbones();
  if (config.run_lengths) runner.lengths();
  runner.bundle.summary()["config_digest"] = runner.digest;
  return std::move(runner.bundle);
}

}  // namespace leukmil::eval
