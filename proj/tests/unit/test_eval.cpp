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

#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/eval/attack.hpp"
#include "leukmil/eval/experiments.hpp"
#include "leukmil/eval/metrics.hpp"
#include "leukmil/eval/partition.hpp"
#include "leukmil/eval/perceptron.hpp"
#include "leukmil/eval/plot.hpp"
#include "support.hpp"

using namespace leukmil;
using namespace leukmil::eval;

namespace {

CellCrop cell(const std::string& id, CellClass c) {
  CellCrop out;
  out.crop_id = id;
  out.cell_class = c;
  out.pixels = Raster(64, 64, c == CellClass::kBlast ? 60 : 190);
  out.pixels.at(10, 10, 0) = static_cast<std::uint8_t>(std::hash<std::string>{}(id));
  return out;
}

PatientBag bag(const std::string& id, Diagnosis d, int normals, int blasts) {
  PatientBag b;
  b.patient_id = id;
  b.diagnosis = d;
  for (int i = 0; i < normals; ++i) b.cells.push_back(cell(id + "n" + std::to_string(i), CellClass::kNormal));
  for (int i = 0; i < blasts; ++i) b.cells.push_back(cell(id + "b" + std::to_string(i), CellClass::kBlast));
  return b;
}

}  // namespace

TEST_CASE("partition sizes and remainder") {
  Rng rng(61);
  const auto parts = partition_patients({bag("p", Diagnosis::kAll, 170, 3)}, {50}, rng);
  REQUIRE(parts.size() == 3);
  std::set<std::string> seen;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    CHECK(parts[k].patient_id == "p/" + std::to_string(k));
    CHECK(parts[k].cells.size() == 50);
    CHECK(parts[k].diagnosis == Diagnosis::kAll);
    for (const auto& c : parts[k].cells) CHECK(seen.insert(c.crop_id).second);
  }
  CHECK(partition_patients({bag("q", Diagnosis::kHealthy, 10, 0)}, {50}, rng).empty());
  CHECK_THROWS_AS(partition_patients({}, {0}, rng), ConfigError);
}

TEST_CASE("partition is a property-preserving split") {
  Rng rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 120));
    const int g = static_cast<int>(rng.uniform_int(1, 40));
    const auto parts = partition_patients({bag("p", Diagnosis::kAll, n, 0)}, {g}, rng);
    CHECK(static_cast<int>(parts.size()) == n / g);
  }
}

TEST_CASE("attacks remove exactly the targeted class") {
  GroundTruthClassifier gt;
  const PatientBag b = bag("p", Diagnosis::kAll, 7, 4);
  const AttackedBag none = apply_attack(b, {AttackMode::kNone}, nullptr);
  CHECK(none.bag.cells.size() == 11);
  CHECK(none.removed == 0);
  const AttackedBag rb = apply_attack(b, {AttackMode::kRemoveBlast, ClassSource::kGroundTruth}, &gt);
  const AttackedBag rn = apply_attack(b, {AttackMode::kRemoveNormal, ClassSource::kGroundTruth}, &gt);
  CHECK(rb.bag.cells.size() == 7);
  CHECK(rn.bag.cells.size() == 4);
  CHECK(rb.removed + rn.removed == b.cells.size());
  for (const auto& c : rb.bag.cells) CHECK(*c.cell_class == CellClass::kNormal);
  CHECK(rb.bag.diagnosis == Diagnosis::kAll);
  CHECK(apply_attack(bag("h", Diagnosis::kHealthy, 0, 3), {AttackMode::kRemoveBlast}, &gt).emptied);

  DetectionLabelTable table;
  CHECK_THROWS(apply_attack(b, {AttackMode::kRemoveBlast, ClassSource::kGroundTruth}, &table));
  CHECK_THROWS(apply_attack(b, {AttackMode::kRemoveBlast, ClassSource::kGroundTruth}, nullptr));
  PatientBag unlabelled = b;
  unlabelled.cells[0].cell_class.reset();
  CHECK_THROWS_AS(apply_attack(unlabelled, {AttackMode::kRemoveBlast}, &gt), ConfigError);

  // Detector labels override ground truth.
  for (const auto& c : b.cells) table.set(c.crop_id, CellClass::kNormal);
  table.set(b.cells[0].crop_id, CellClass::kBlast);
  CHECK(apply_attack(b, {AttackMode::kRemoveNormal, ClassSource::kDetector}, &table).bag.cells.size() == 1);
  CHECK(parse_attack_mode("remove-normal") == AttackMode::kRemoveNormal);
  CHECK(parse_class_source("detector") == ClassSource::kDetector);
  CHECK_THROWS_AS(parse_attack_mode("remove"), ConfigError);
}

TEST_CASE("attack experiment covers ALL bags at every group size") {
  Rng rng(63);
  const auto fx = features::FeatureExtractor::create("toy_cnn");
  const model::AggregatorClassifier<float> m(model::ModelConfig{fx.dim()}, rng);
  model::FeatureCache cache(fx);
  GroundTruthClassifier gt;
  const std::vector<PatientBag> bags{bag("a", Diagnosis::kAll, 25, 5), bag("b", Diagnosis::kAll, 0, 12),
                                     bag("h", Diagnosis::kHealthy, 40, 0)};
  const AttackMode modes[] = {AttackMode::kNone, AttackMode::kRemoveBlast, AttackMode::kRemoveNormal};
  const int sizes[] = {0, 10};
  const AttackTable t = run_attack_experiment(m, bags, modes, sizes, gt, cache, rng);
  CHECK(t.rows.size() == 6);
  const AttackRow* whole = t.find(0, AttackMode::kRemoveBlast);
  REQUIRE(whole != nullptr);
  CHECK(whole->all_bags == 2);
  CHECK(whole->emptied == 1);
  CHECK(t.find(10, AttackMode::kNone)->all_bags == 4);  // 3 + 1 pseudo-patients
  CHECK(t.find(7, AttackMode::kNone) == nullptr);
  CHECK(t.to_json().at("rows").size() == 6);
}

TEST_CASE("perceptron on count features") {
  std::vector<CountSample> separable;
  for (int i = 0; i < 20; ++i) {
    separable.push_back({30.0 + i, 2.0 + i % 4, Diagnosis::kAll});
    separable.push_back({35.0 + i, 0.0, Diagnosis::kHealthy});
  }
  const PerceptronResult r = train_perceptron(separable);
  CHECK(r.accuracy == 1.0);
  CHECK(r.weights[1] > 0);

  // XOR-like labels cannot be fit by a line: pocket accuracy stays below 1.
  const std::vector<CountSample> xorish{{0, 0, Diagnosis::kHealthy}, {1, 1, Diagnosis::kHealthy},
                                        {0, 1, Diagnosis::kAll}, {1, 0, Diagnosis::kAll}};
  const PerceptronResult x = train_perceptron(xorish, 200);
  CHECK(x.accuracy == doctest::Approx(0.75));
  CHECK_THROWS_AS(train_perceptron({{1, 0, Diagnosis::kAll}, {2, 0, Diagnosis::kAll}}), InvariantViolation);

  GroundTruthClassifier gt;
  const auto samples = count_samples({bag("a", Diagnosis::kAll, 3, 2)}, gt);
  CHECK(samples.front().n_normal == 3);
  CHECK(samples.front().n_blast == 2);
  CHECK(ideal_perceptron_baseline({bag("a", Diagnosis::kAll, 3, 2), bag("h", Diagnosis::kHealthy, 5, 0)}, gt).accuracy ==
        1.0);
}

TEST_CASE("patient metrics pair predictions with bags") {
  const std::vector<PatientBag> bags{bag("a", Diagnosis::kAll, 1, 1), bag("h", Diagnosis::kHealthy, 1, 0)};
  std::vector<model::PatientPrediction> preds(2);
  preds[0] = {"a", Diagnosis::kAll, 0.9, {0.9}, false};
  preds[1] = {"h", Diagnosis::kAll, 0.8, {0.8}, false};
  const MetricsReport m = patient_metrics(preds, bags);
  CHECK(m.confusion.tp == 1);
  CHECK(m.confusion.fp == 1);
  CHECK(*recall_all(preds, bags) == 1.0);
  preds[0].no_evidence = true;
  preds[0].label = Diagnosis::kHealthy;
  CHECK(patient_metrics(preds, bags).confusion.fn == 1);
  preds[1].patient_id = "x";
  CHECK_THROWS(patient_metrics(preds, bags));
}

TEST_CASE("spearman and summary statistics") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 100}, z{5, 4, 3, 2, 1};
  CHECK(*spearman(x, y) == doctest::Approx(1.0));
  CHECK(*spearman(x, z) == doctest::Approx(-1.0));
  const std::vector<double> ties{1, 1, 2, 2, 3};
  CHECK(*spearman(x, ties) == doctest::Approx(0.9486832980505138));
  const std::vector<double> flat{3, 3, 3, 3, 3};
  CHECK_FALSE(spearman(x, flat).has_value());
  const MeanStd ms = mean_std(x);
  CHECK(ms.mean == 3.0);
  CHECK(ms.stddev == doctest::Approx(std::sqrt(2.5)));
  CHECK(mean_std(std::vector<double>{4.0}).stddev == 0.0);
}

TEST_CASE("plot csv carries the config digest") {
  leukmil::testing::TempDir dir("plot");
  PlotData p{"t", "x", "y", {}};
  p.add(20, "none", 1.0);
  p.add(20, "remove-blast", 0.1);
  write_plot_csv(p, "abc123", dir / "p.csv");
  std::ifstream in(dir / "p.csv");
  std::string first, header;
  std::getline(in, first);
  std::getline(in, header);
  CHECK(first == "# config_digest=abc123");
  CHECK(header == "x,series,value");
  render_plot_png(p, dir / "p.png");
  CHECK(std::filesystem::file_size(dir / "p.png") > 100);
}

TEST_CASE("ablation config json is strict") {
  const AblationConfig c = AblationConfig::desk();
  const AblationConfig back = AblationConfig::from_json(c.to_json());
  CHECK(back.digest() == c.digest());
  auto j = c.to_json();
  j["unknown_key"] = 1;
  CHECK_THROWS_AS(AblationConfig::from_json(j), ConfigError);
}

TEST_CASE("report bundle digests ignore timestamps") {
  ReportBundle a, b;
  MetricsReport ra = named_report(compute_metrics({3, 1, 4, 2}), "x", 7, "cfg");
  MetricsReport rb = ra;
  rb.started_at = "2000-01-01T00:00:00Z";
  rb.finished_at = "2000-01-01T00:00:05Z";
  a.add(ra);
  b.add(rb);
  CHECK(a.digest() == b.digest());
  CHECK_THROWS(a.add(ra));
  b.summary()["k"] = 1;
  CHECK(a.digest() != b.digest());
  MetricsReport no_cfg = ra;
  no_cfg.name = "y";
  no_cfg.config_digest.clear();
  CHECK_THROWS(a.add(no_cfg));
}
