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

#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "leukmil/baggen/pools.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/model/predict.hpp"
#include "leukmil/model/training.hpp"
#include "leukmil/synth/generator.hpp"
#include "support.hpp"

using namespace leukmil;
using namespace leukmil::model;

namespace {

SequenceBatch<double> random_batch(int B, int L, int dim, Rng& rng, double blank_rate = 0.3) {
  SequenceBatch<double> batch{B, L, nn::Mat<double>::Zero(B * L, dim), std::vector<bool>(B * L, false)};
  for (int r = 0; r < B * L; ++r) {
    if (rng.bernoulli(blank_rate)) continue;
    batch.present[r] = true;
    for (int c = 0; c < dim; ++c) batch.features(r, c) = rng.normal();
  }
  return batch;
}

void check_group(AggregatorClassifier<double>& m, std::vector<nn::DenseParam<double>*> group, Rng& rng) {
  for (int point = 0; point < 3; ++point) {
    const auto batch = random_batch(3, 4, 5, rng);
    const std::vector<int> labels{1, 0, 1};
    auto loss = [&] {
      const auto out = m.forward(batch);
      double l = 0;
      for (int b = 0; b < 3; ++b) l -= std::log(out.probs(b, labels[b]));
      return l / 3;
    };
    m.zero_grad();
    m.loss_and_gradients(batch, labels);
    for (int k = 0; k < 10; ++k) {
      auto* p = group[rng.uniform_int(0, static_cast<std::int64_t>(group.size()) - 1)];
      const Eigen::Index i = rng.uniform_int(0, p->value.size() - 1);
      const double keep = p->value.data()[i], h = 1e-5;
      p->value.data()[i] = keep + h;
      const double up = loss();
      p->value.data()[i] = keep - h;
      const double down = loss();
      p->value.data()[i] = keep;
      const double num = (up - down) / (2 * h), ana = p->grad.data()[i];
      CAPTURE(p->name);
      CHECK(std::abs(num - ana) <= 1e-3 * std::max(1e-4, std::max(std::abs(num), std::abs(ana))) + 1e-9);
    }
  }
}

struct Corpus {
  leukmil::testing::TempDir dir{"model"};
  DatasetManifest manifest;
  baggen::CellPools pools;
  Corpus() {
    Rng rng(51);
    manifest = synth::generate_corpus(synth::SynthConfig{}, {40, 40, 2, 3, 0.2}, dir.path(), rng);
    pools = baggen::pools_from_manifest(manifest, Split::kTrain);
  }
};

Corpus& corpus() {
  static Corpus c;
  return c;
}

const features::FeatureExtractor& toy() {
  static const auto fx = features::FeatureExtractor::create("toy_cnn");
  return fx;
}

}  // namespace

TEST_CASE("aggregator gradients match finite differences") {
  Rng rng(52);
  for (bool mask_skip : {false, true}) {
    CAPTURE(mask_skip);
    AggregatorClassifier<double> m(ModelConfig{5, features::Activation::kRelu, mask_skip}, rng);
    check_group(m, {&m.projection().weight, &m.projection().bias}, rng);
    check_group(m, m.recurrent_params(), rng);
    check_group(m, m.patient_params(), rng);
    check_group(m, m.classifier_params(), rng);
  }
}

TEST_CASE("probabilities are a softmax and batch rows are independent") {
  Rng rng(53);
  AggregatorClassifier<double> m(ModelConfig{5}, rng);
  const auto batch = random_batch(6, 7, 5, rng);
  const auto out = m.forward(batch);
  for (int b = 0; b < 6; ++b) CHECK(out.probs.row(b).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.patient.cols() == kPatientDim);
  // Sequence 2 alone gives the same answer as inside the batch.
  SequenceBatch<double> one{1, 7, nn::Mat<double>(7, 5), std::vector<bool>(7)};
  for (int t = 0; t < 7; ++t) {
    one.features.row(t) = batch.features.row(t * 6 + 2);
    one.present[t] = batch.present[t * 6 + 2];
  }
  CHECK(m.forward(one).probs(0, 1) == doctest::Approx(out.probs(2, 1)).epsilon(1e-12));
}

TEST_CASE("all-blank sequences share one output") {
  Rng rng(54);
  AggregatorClassifier<double> m(ModelConfig{5}, rng);
  SequenceBatch<double> blank{4, 9, nn::Mat<double>::Zero(36, 5), std::vector<bool>(36, false)};
  const auto out = m.forward(blank);
  for (int b = 1; b < 4; ++b) CHECK(out.probs(b, 1) == out.probs(0, 1));
}

TEST_CASE("with mask skipping, blank padding is neutral") {
  Rng rng(55);
  AggregatorClassifier<double> m(ModelConfig{5, features::Activation::kRelu, true}, rng);
  const auto dense = random_batch(1, 5, 5, rng, 0.0);
  SequenceBatch<double> padded{1, 9, nn::Mat<double>::Zero(9, 5), std::vector<bool>(9, false)};
  const int slots[] = {1, 2, 5, 6, 8};
  for (int k = 0; k < 5; ++k) {
    padded.features.row(slots[k]) = dense.features.row(k);
    padded.present[slots[k]] = true;
  }
  CHECK(m.forward(padded).probs(0, 1) == doctest::Approx(m.forward(dense).probs(0, 1)).epsilon(1e-12));
}

TEST_CASE("initialisation is deterministic") {
  Rng a(56), b(56);
  AggregatorClassifier<float> ma(ModelConfig{8}, a), mb(ModelConfig{8}, b);
  const auto pa = ma.params(), pb = mb.params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("config validation") {
  TrainConfig c = TrainConfig::stage2();
  CHECK_NOTHROW(c.validate());
  CHECK(c.length == 15);
  c.cell_range = {5, 16};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig::stage1();
  c.length = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig::stage2();
  CHECK(TrainConfig::from_json(c.to_json()).digest() == c.digest());
  c.learning_rate = 2e-3;
  CHECK(c.digest() != TrainConfig::stage2().digest());
}

TEST_CASE("zero epochs return the initial parameters") {
  TrainConfig c = TrainConfig::stage1();
  c.epochs = 0;
  Rng a(57), b(57);
  const TrainOutcome out = train_stage1(corpus().pools, c, toy(), a);
  CHECK(out.best_epoch == 0);
  CHECK(out.history.empty());
  // Same init stream as training uses.
  Rng init = b.derive(3);
  const AggregatorClassifier<float> fresh(ModelConfig{toy().dim(), c.activation, c.mask_skip}, init);
  const auto pf = fresh.params(), po = out.model.params();
  for (std::size_t i = 0; i < pf.size(); ++i) CHECK(pf[i]->value == po[i]->value);
}

TEST_CASE("labels carrying no signal give chance accuracy") {
  Rng rng(58);
  baggen::CellPools shuffled;
  std::vector<CellCrop> all = corpus().pools.blast;
  all.insert(all.end(), corpus().pools.normal.begin(), corpus().pools.normal.end());
  rng.shuffle(std::span(all));
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].cell_class = i % 2 ? CellClass::kBlast : CellClass::kNormal;
    (i % 2 ? shuffled.blast : shuffled.normal).push_back(all[i]);
  }
  TrainConfig c = TrainConfig::stage1();
  c.epochs = 4;
  const TrainOutcome out = train_stage1(shuffled, c, toy(), rng);
  CHECK(out.val_accuracy > 0.3);
  CHECK(out.val_accuracy < 0.7);
}

TEST_CASE("two-stage training separates held-out sequences") {
  Rng rng(59);
  TrainConfig s1 = TrainConfig::stage1();
  const TrainOutcome first = train_stage1(corpus().pools, s1, toy(), rng);
  CHECK(first.val_accuracy >= 0.95);
  CHECK(first.extractor_digest_before == first.extractor_digest_after);

  TrainConfig s2 = TrainConfig::stage2();
  s2.epochs = 5;
  s2.sequences_per_epoch = 1024;
  s2.validation_sequences = 256;
  CHECK_THROWS_AS(train_stage2(corpus().pools, s2, nullptr, toy(), rng), ConfigError);
  const TrainOutcome second = train_stage2(corpus().pools, s2, &first.checkpoint, toy(), rng);
  CHECK(second.val_accuracy >= 0.95);
  CHECK(second.extractor_digest_before == toy().digest());

  // Checkpoint restores the same predictions and rejects a foreign extractor.
  const auto restored = model_from_checkpoint(second.checkpoint, toy().digest());
  CHECK_THROWS_AS(model_from_checkpoint(second.checkpoint, std::string(64, '0')), DigestMismatch);
  FeatureCache cache(toy());
  PatientBag bag;
  bag.patient_id = "p";
  bag.diagnosis = Diagnosis::kAll;
  bag.cells.assign(corpus().pools.normal.begin(), corpus().pools.normal.begin() + 20);
  bag.cells.push_back(corpus().pools.blast.front());
  const auto a = predict_patient(second.model, bag, cache);
  const auto b = predict_patient(restored, bag, cache);
  CHECK(a.probability == b.probability);
  REQUIRE(a.per_sequence.size() == 2);
  CHECK(a.probability == *std::max_element(a.per_sequence.begin(), a.per_sequence.end()));
  const auto mean = predict_patient(second.model, bag, cache, {baggen::Packing::kChunk, 15, Aggregation::kMean});
  CHECK(mean.probability == doctest::Approx((a.per_sequence[0] + a.per_sequence[1]) / 2));
  CHECK(mean.probability <= a.probability);
  const auto single = predict_patient(second.model, bag, cache, {baggen::Packing::kSingle, 15, Aggregation::kMax});
  CHECK(single.per_sequence.size() == 1);

  // Cell probabilities: model sees each crop as a length-1 sequence.
  const auto cp = cell_probabilities(first.model, std::span(corpus().pools.blast).first(5), cache);
  for (double p : cp) CHECK(p > 0.5);
}

TEST_CASE("prediction edge cases") {
  Rng rng(60);
  const AggregatorClassifier<float> m(ModelConfig{toy().dim()}, rng);
  FeatureCache cache(toy());
  PatientBag empty;
  empty.patient_id = "e";
  CHECK_THROWS_AS(predict_patient(m, empty, cache), InvariantViolation);
  const auto ne = predict_or_no_evidence(m, empty, cache);
  CHECK(ne.no_evidence);
  CHECK(ne.label == Diagnosis::kHealthy);
  CHECK(decide(0.5) == Diagnosis::kHealthy);
  CHECK(decide(0.5000001) == Diagnosis::kAll);
  CHECK(parse_aggregation("mean") == Aggregation::kMean);
  CHECK_THROWS_AS(parse_aggregation("median"), ConfigError);
  const AggregatorClassifier<float> wrong(ModelConfig{7}, rng);
  PatientBag one;
  one.cells = {corpus().pools.blast.front()};
  CHECK_THROWS(predict_patient(wrong, one, cache));
}
