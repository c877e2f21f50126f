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

// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "leukmil/baggen/sequence.hpp"
#include "leukmil/cli/config.hpp"
#include "leukmil/core/metrics.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/detect/average_precision.hpp"
#include "leukmil/detect/train.hpp"
#include "leukmil/features/projection.hpp"
#include "leukmil/model/classifier.hpp"
#include "leukmil/synth/generator.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace leukmil;
using nlohmann::json;

namespace {

// Pinned tolerances and thresholds.
constexpr double kMetricTolPoints = 0.01;
constexpr double kOracleTol = 1e-12;
constexpr double kChiSquareCritical14 = 36.123;  // chi-square, 14 dof, p = 0.001
constexpr double kGradRelTol = 1e-3;
constexpr double kDetectorMapFloor = 0.90;
constexpr double kMapOracleTol = 1e-9;
constexpr double kCellAccuracyFloor = 0.95;
constexpr double kPatientAccuracyFloor = 0.90;
constexpr double kAttackDropPoints = 0.30;
constexpr double kPerceptronMargin = 0.02;
constexpr std::uint64_t kSeed = 7;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const Outcome& o, double secs) {
  std::printf("criterion %d: %s (%.1f s) %s\n", id, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void timed(int id, double budget_s, const std::function<Outcome()>& f) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = seconds_since(t0);
  if (secs > budget_s) {
    o.pass = false;
    o.detail += " [over " + std::to_string(static_cast<int>(budget_s)) + " s budget]";
  }
  report(id, o, secs);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---- 1
Outcome metric_reconstruction() {
  const MetricsReport m = compute_metrics({40, 1, 10, 1});
  const double want[] = {96.15, 97.56, 90.91, 94.24};
  const double got[] = {*m.accuracy * 100, *m.sensitivity * 100, *m.specificity * 100, *m.macro_f1 * 100};
  bool ok = true;
  std::string d;
  for (int i = 0; i < 4; ++i) {
    ok &= std::abs(got[i] - want[i]) <= kMetricTolPoints;
    d += fmt(got[i]) + " ";
  }
  return {ok, "acc/sens/spec/macroF1 = " + d};
}

// ---- 2
Outcome metrics_oracle() {
  Rng rng(kSeed);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Diagnosis> pred, actual;
    const int n = static_cast<int>(rng.uniform_int(1, 200));
    for (int i = 0; i < n; ++i) {
      actual.push_back(rng.bernoulli(0.5) ? Diagnosis::kAll : Diagnosis::kHealthy);
      pred.push_back(rng.bernoulli(0.5) ? Diagnosis::kAll : Diagnosis::kHealthy);
    }
    const MetricsReport m = compute_metrics(tally(pred, actual));
    // Recount straight from the samples.
    long tp = 0, tn = 0, fp = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      const bool p = pred[i] == Diagnosis::kAll, a = actual[i] == Diagnosis::kAll;
      tp += p && a;
      tn += !p && !a;
      fp += p && !a;
      fn += !p && a;
    }
    auto ratio = [](long a, long b) { return b == 0 ? std::optional<double>() : std::optional<double>(double(a) / b); };
    auto f1 = [](long t, long f_pos, long f_neg) {
      return 2 * t + f_pos + f_neg == 0 ? std::optional<double>() : std::optional<double>(2.0 * t / (2 * t + f_pos + f_neg));
    };
    const auto f_all = f1(tp, fp, fn), f_h = f1(tn, fn, fp);
    const std::optional<double> macro = f_all && f_h ? std::optional<double>((*f_all + *f_h) / 2) : std::nullopt;
    auto same = [](const std::optional<double>& a, const std::optional<double>& b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || std::abs(*a - *b) <= kOracleTol;
    };
    if (!same(m.accuracy, ratio(tp + tn, n)) || !same(m.sensitivity, ratio(tp, tp + fn)) ||
        !same(m.specificity, ratio(tn, tn + fp)) || !same(m.macro_f1, macro)) {
      ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000"};
}

// ---- 3
Outcome label_soundness() {
  Rng rng(kSeed);
  constexpr int kL = 15;
  std::vector<int> slot(kL, 0);
  int violations = 0, all_count = 0;
  for (int i = 0; i < 10000; ++i) {
    const Diagnosis d = i % 2 ? Diagnosis::kAll : Diagnosis::kHealthy;
    const baggen::SequenceRef s = baggen::draw_sequence(100, 100, kL, d, {5, 15}, rng);
    int blasts = 0;
    for (const auto& e : s.entries) blasts += e.source == baggen::Source::kBlast;
    if ((s.label == Diagnosis::kAll) != (blasts >= 1) || blasts != s.blast_count) ++violations;
    if (s.witness_slot >= 0) {
      ++slot[s.witness_slot];
      ++all_count;
    }
  }
  const double expect = static_cast<double>(all_count) / kL;
  double chi = 0;
  for (int c : slot) chi += (c - expect) * (c - expect) / expect;
  return {violations == 0 && chi < kChiSquareCritical14,
          std::to_string(violations) + " label violations; witness chi2 = " + fmt(chi) + " (crit " +
              fmt(kChiSquareCritical14) + ")"};
}

// ---- 4
Outcome gradient_checks() {
  Rng rng(kSeed);
  model::AggregatorClassifier<double> m(model::ModelConfig{6}, rng);
  const std::vector<std::pair<std::string, std::vector<nn::DenseParam<double>*>>> groups{
      {"projection", {&m.projection().weight, &m.projection().bias}},
      {"recurrent", m.recurrent_params()},
      {"patient", m.patient_params()},
      {"classifier", m.classifier_params()}};
  double worst = 0;
  std::string d;
  for (const auto& [name, params] : groups) {
    double group_worst = 0;
    for (int point = 0; point < 3; ++point) {
      const int B = 3, L = 5;
      model::SequenceBatch<double> batch{B, L, nn::Mat<double>::Zero(B * L, 6), std::vector<bool>(B * L, false)};
      for (int r = 0; r < B * L; ++r) {
        if (rng.bernoulli(0.25)) continue;
        batch.present[r] = true;
        for (int c = 0; c < 6; ++c) batch.features(r, c) = rng.normal();
      }
      const std::vector<int> labels{1, 0, static_cast<int>(point % 2)};
      auto loss = [&] {
        const auto out = m.forward(batch);
        double l = 0;
        for (int b = 0; b < B; ++b) l -= std::log(out.probs(b, labels[b]));
        return l / B;
      };
      m.zero_grad();
      m.loss_and_gradients(batch, labels);
      for (int k = 0; k < 10; ++k) {
        auto* p = params[rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1)];
        const Eigen::Index i = rng.uniform_int(0, p->value.size() - 1);
        const double keep = p->value.data()[i], h = 1e-5;
        p->value.data()[i] = keep + h;
        const double up = loss();
        p->value.data()[i] = keep - h;
        const double down = loss();
        p->value.data()[i] = keep;
        const double num = (up - down) / (2 * h), ana = p->grad.data()[i];
        const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
        group_worst = std::max(group_worst, std::abs(num - ana) / denom);
      }
    }
    worst = std::max(worst, group_worst);
    d += name + "=" + std::to_string(group_worst) + " ";
  }
  return {worst <= kGradRelTol, "max rel err " + d};
}

// ---- 6
Outcome detector_desk() {
  leukmil::testing::TempDir dir("accept_det");
  Rng rs = Rng(kSeed).derive(seed_offset::kSynth);
  const DatasetManifest m = synth::generate_corpus(synth::SynthConfig{}, {50, 50, 1, 1, 0.15}, dir.path(), rs);
  const auto n_test = m.split(Split::kTest).size();
  Rng rd = Rng(kSeed).derive(seed_offset::kDetector);
  const auto cfg = cli::ReproConfig::for_budget(cli::Budget::kDesk, kSeed).detector;
  const detect::TrainedDetector trained = detect::train_detector(m, cfg, rd);
  const double map = detect::evaluate_map(trained.model, m, Split::kTest).map;
  const double oracle = detect::evaluate_map(*detect::oracle_detector(m, cfg.class_map), m, Split::kTest).map;

  // evaluate_map against the brute-force oracle on small image sets.
  double worst = 0;
  const auto test = m.split(Split::kTest);
  for (std::size_t start = 0; start + 1 < test.size(); start += 5) {
    std::vector<detect::ImageDetections> images;
    for (std::size_t k = start; k < std::min(start + 10, test.size()); ++k) {
      const AnnotatedImage img = m.load_image(*test[k]);
      auto preds = detect::detect_cells(trained.model, img, detect::kMapScoreFloor).boxes;
      images.push_back({test[k]->boxes, preds});
    }
    // Single-class view so the oracle (class-agnostic) applies.
    for (auto& im : images) {
      for (auto& b : im.ground_truth) b.cell_class.reset();
      for (auto& b : im.predictions) b.cell_class.reset();
    }
    const double got = detect::compute_map(images, detect::ClassMap::kCell).map;
    worst = std::max(worst, std::abs(got - leukmil::testing::brute_force_ap(images, 0.5)));
  }
  const bool ok = m.records.size() == 100 && map >= kDetectorMapFloor && oracle == 1.0 && worst <= kMapOracleTol;
  return {ok, std::to_string(m.records.size()) + " images (" + std::to_string(n_test) + " test); mAP@0.5 " + fmt(map) +
                  ", oracle " + fmt(oracle) + ", |mAP - brute force| " + std::to_string(worst)};
}

// ---- 5, 7-10: two CLI repro runs with the same seed
struct ReproRun {
  int code = -1;
  double seconds = 0;
  json bundle;
};

ReproRun run_repro(const std::filesystem::path& out) {
  const std::string cmd = std::string("OMP_NUM_THREADS=1 ") + LEUKMIL_CLI_PATH + " repro --budget desk --seed " +
                          std::to_string(kSeed) + " --quiet --out " + out.string() + " >" + (out.string() + ".stdout") +
                          " 2>" + (out.string() + ".stderr");
  const auto t0 = Clock::now();
  const int status = std::system(cmd.c_str());
  ReproRun r;
  r.seconds = seconds_since(t0);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (r.code == 0) {
    std::ifstream in(out / "bundle" / "bundle.json");
    r.bundle = json::parse(in);
  }
  return r;
}

double mean_of(const json& ms) { return ms.at("mean").get<double>(); }

}  // namespace

int main() {
  timed(1, 1.0, metric_reconstruction);
  timed(2, 10.0, metrics_oracle);
  timed(3, 60.0, label_soundness);
  timed(4, 120.0, gradient_checks);
  timed(6, 600.0, detector_desk);

  leukmil::testing::TempDir dir("accept_repro");
  const ReproRun a = run_repro(dir / "a");
  std::printf("repro run 1: exit %d, %.1f s\n", a.code, a.seconds);
  std::fflush(stdout);
  ReproRun b = run_repro(dir / "b");
  std::printf("repro run 2: exit %d, %.1f s\n", b.code, b.seconds);
  std::fflush(stdout);
  if (a.code != 0) {
    for (int id : {5, 7, 8, 9, 10}) report(id, {false, "repro exited with " + std::to_string(a.code)}, a.seconds);
    return 1;
  }
  const json& s = a.bundle.at("summary");
  const json& failed = a.bundle.at("failures");

  report(5, {s.at("extractor_frozen").get<bool>(), "backbone digest unchanged: " + s.at("extractor_frozen").dump()},
         0.0);

  {
    const double cell = s.at("stage1_test_cell_accuracy").get<double>();
    const double patient = s.at("patient_accuracy_oracle").get<double>();
    Outcome o{cell >= kCellAccuracyFloor && patient >= kPatientAccuracyFloor && a.seconds <= 1800.0,
              "stage-1 cell accuracy " + fmt(cell) + ", patient accuracy (oracle) " + fmt(patient)};
    report(7, o, a.seconds);
  }
  {
    const json& at = s.at("attacks");
    const double none = mean_of(at.at("none")), rb = mean_of(at.at("remove_blast")), rn = mean_of(at.at("remove_normal"));
    const auto seeds = at.at("none").at("n").get<int>();
    Outcome o{seeds == 5 && rb <= none - kAttackDropPoints && rn >= none && at.at("cardinality_identity").get<bool>(),
              std::to_string(seeds) + "-seed recall: none " + fmt(none) + ", remove-blast " + fmt(rb) +
                  ", remove-normal " + fmt(rn) + ", identity " + at.at("cardinality_identity").dump()};
    report(8, o, 0.0);
  }
  {
    const json& sp = s.at("group_size_spearman");
    const double with = mean_of(s.at("pretraining").at("with")), without = mean_of(s.at("pretraining").at("without"));
    const double rec = mean_of(s.at("perceptron").at("recurrent")), perc = mean_of(s.at("perceptron").at("perceptron"));
    const bool ok = sp.is_number() && sp.get<double>() > 0 && with >= without && rec >= perc - kPerceptronMargin &&
                    failed.empty() && a.seconds <= 2700.0;
    report(9, {ok, "group-size spearman " + sp.dump() + "; pretraining " + fmt(with) + " vs " + fmt(without) +
                       "; recurrent " + fmt(rec) + " vs perceptron " + fmt(perc) + "; failures " +
                       std::to_string(failed.size())},
           a.seconds);
  }
  {
    bool ok = b.code == 0 && a.bundle.at("bundle_digest") == b.bundle.at("bundle_digest") &&
              a.bundle.at("reports") == b.bundle.at("reports") && a.bundle.at("config_digest") == b.bundle.at("config_digest");
    report(10, {ok, "bundle digests " + a.bundle.at("bundle_digest").get<std::string>().substr(0, 16) + " / " +
                        (b.code == 0 ? b.bundle.at("bundle_digest").get<std::string>().substr(0, 16) : "n/a") + ", " +
                        std::to_string(a.bundle.at("reports").size()) + " report digests compared"},
           b.seconds);
  }
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", failures);
  return failures == 0 ? 0 : 1;
}
