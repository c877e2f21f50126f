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
#include "leukmil/core/checkpoint.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/detect/average_precision.hpp"
#include "leukmil/detect/boxes.hpp"
#include "leukmil/detect/crop.hpp"
#include "leukmil/detect/train.hpp"
#include "leukmil/synth/generator.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace leukmil;
using namespace leukmil::detect;

namespace {

BoundingBox box(double x0, double y0, double x1, double y1, double score = 1.0,
                std::optional<CellClass> c = std::nullopt) {
  BoundingBox b{x0, y0, x1, y1, score, c};
  return b;
}

BoundingBox jitter(const BoundingBox& b, Rng& rng, double amount) {
  BoundingBox out = b;
  out.x_min += rng.uniform(-amount, amount);
  out.y_min += rng.uniform(-amount, amount);
  out.x_max += rng.uniform(-amount, amount);
  out.y_max += rng.uniform(-amount, amount);
  return out;
}

std::vector<ImageDetections> random_scene(Rng& rng, int images) {
  std::vector<ImageDetections> out(images);
  for (auto& im : out) {
    const int n = static_cast<int>(rng.uniform_int(1, 5));
    for (int k = 0; k < n; ++k) {
      const double x = k * 30.0, y = rng.uniform(0, 80);
      im.ground_truth.push_back(box(x, y, x + 20, y + 20));
    }
    for (const auto& g : im.ground_truth) {
      if (rng.bernoulli(0.8)) im.predictions.push_back(jitter(g, rng, 4.0));
      if (rng.bernoulli(0.3)) im.predictions.push_back(jitter(g, rng, 6.0));
    }
    const int fp = static_cast<int>(rng.uniform_int(0, 2));
    for (int k = 0; k < fp; ++k) {
      const double x = rng.uniform(0, 100);
      im.predictions.push_back(box(x, 100, x + 15, 118));
    }
    for (auto& p : im.predictions) p.score = rng.uniform();
  }
  return out;
}

}  // namespace

TEST_CASE("mAP agrees with a brute-force reference") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto scene = random_scene(rng, 1 + trial % 4);
    const MapResult m = compute_map(scene, ClassMap::kCell, 0.5);
    REQUIRE(m.per_class.size() == 1);
    CHECK(m.map == doctest::Approx(leukmil::testing::brute_force_ap(scene, 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("mAP edge cases") {
  std::vector<ImageDetections> scene{{{box(0, 0, 10, 10), box(20, 20, 40, 40)}, {}}};
  scene[0].predictions = scene[0].ground_truth;
  CHECK(compute_map(scene, ClassMap::kCell).map == 1.0);
  scene[0].predictions.clear();
  CHECK(compute_map(scene, ClassMap::kCell).map == 0.0);
  // Duplicates of one box count once.
  scene[0].predictions = {box(0, 0, 10, 10, 0.9), box(0, 0, 10, 10, 0.8)};
  CHECK(compute_map(scene, ClassMap::kCell).map == doctest::Approx(0.5));
  CHECK_THROWS_AS(compute_map(scene, ClassMap::kCell, 0.0), ConfigError);
  CHECK_THROWS_AS(compute_map({{{}, {}}}, ClassMap::kCell), InvariantViolation);
}

TEST_CASE("two-class mAP skips classes without ground truth") {
  std::vector<ImageDetections> scene{{{box(0, 0, 10, 10, 1, CellClass::kBlast)}, {}}};
  scene[0].predictions = {box(0, 0, 10, 10, 0.9, CellClass::kBlast), box(30, 30, 40, 40, 0.8, CellClass::kNormal)};
  const MapResult m = compute_map(scene, ClassMap::kBlastNormal);
  CHECK(m.per_class.size() == 1);
  CHECK(m.absent == std::vector<std::string>{"NORMAL"});
  CHECK(m.map == 1.0);
  // Wrong-class predictions do not match.
  scene[0].predictions = {box(0, 0, 10, 10, 0.9, CellClass::kNormal)};
  CHECK(compute_map(scene, ClassMap::kBlastNormal).map == 0.0);
}

TEST_CASE("AP never drops when a false positive is demoted below every true positive") {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    auto scene = random_scene(rng, 3);
    const double before = compute_map(scene, ClassMap::kCell).map;
    // Lower the score of every prediction that matches nothing.
    for (auto& im : scene)
      for (auto& p : im.predictions) {
        double best = 0;
        for (const auto& g : im.ground_truth) best = std::max(best, iou(p, g));
        if (best < 0.5) p.score = -1.0;
      }
    CHECK(compute_map(scene, ClassMap::kCell).map >= before - 1e-12);
  }
}

TEST_CASE("nms keeps the top box and is idempotent") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BoundingBox> boxes;
    for (int k = 0; k < 30; ++k) {
      const double x = rng.uniform(0, 60), y = rng.uniform(0, 60);
      boxes.push_back(box(x, y, x + rng.uniform(5, 25), y + rng.uniform(5, 25), rng.uniform()));
    }
    const auto once = apply_nms(boxes, 0.5);
    const auto twice = apply_nms(once, 0.5);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].score == twice[i].score);
    const double top = std::max_element(boxes.begin(), boxes.end(), [](auto& a, auto& b) { return a.score < b.score; })->score;
    CHECK(once.front().score == top);
    for (std::size_t i = 0; i < once.size(); ++i)
      for (std::size_t j = i + 1; j < once.size(); ++j) CHECK(iou(once[i], once[j]) <= 0.5);
  }
}

TEST_CASE("box encoding round trips") {
  Rng rng(24);
  const Deltas w{10, 10, 5, 5};
  for (int k = 0; k < 50; ++k) {
    const BoundingBox ref = box(rng.uniform(0, 50), rng.uniform(0, 50), 60 + rng.uniform(0, 30), 60 + rng.uniform(0, 30));
    const BoundingBox t = jitter(ref, rng, 5);
    const BoundingBox back = decode_box(ref, encode_box(ref, t, w), w);
    CHECK(back.x_min == doctest::Approx(t.x_min));
    CHECK(back.y_max == doctest::Approx(t.y_max));
  }
  const BoundingBox c = clip_box(box(-5, -3, 140, 50), 128, 128);
  CHECK(c.x_min == 0);
  CHECK(c.y_min == 0);
  CHECK(c.x_max == 128);
}

TEST_CASE("oracle detector reproduces the annotations") {
  leukmil::testing::TempDir dir("oracle");
  synth::SynthConfig sc;
  Rng rng(25);
  const DatasetManifest m = synth::generate_corpus(sc, {3, 3, 1, 2, 0.34}, dir.path(), rng);
  for (ClassMap cm : {ClassMap::kCell, ClassMap::kBlastNormal}) {
    const auto oracle = oracle_detector(m, cm);
    CHECK(evaluate_map(*oracle, m, Split::kTest).map == 1.0);
    CHECK(evaluate_map(*oracle, m, Split::kTrain).map == 1.0);
  }
  const auto oracle = oracle_detector(m, ClassMap::kBlastNormal);
  const AnnotatedImage img = m.load_image(m.records.front());
  const DetectionResult r = detect_cells(*oracle, img);
  REQUIRE(r.boxes.size() == img.boxes.size());
  const auto crops = crop_cells(img, r, 48);
  REQUIRE(crops.size() == r.boxes.size());
  for (std::size_t k = 0; k < crops.size(); ++k) {
    CHECK(crops[k].pixels.width == 48);
    CHECK(crops[k].pixels.height == 48);
    CHECK(crops[k].cell_class == img.boxes[k].cell_class);
    CHECK(crops[k].crop_id == img.image_id + "#" + std::to_string(k));
  }
}

TEST_CASE("crops reject boxes outside the image") {
  AnnotatedImage img;
  img.image_id = "x";
  img.pixels = Raster(32, 32, 100);
  DetectionResult r;
  r.boxes = {box(40, 40, 50, 50)};
  CHECK_THROWS_AS(crop_cells(img, r), InvariantViolation);
  r.boxes = {box(-4.5, 2.2, 10.1, 40)};
  const auto crops = crop_cells(img, r, 16);
  CHECK(crops.front().pixels.width == 16);
}

TEST_CASE("detector training is deterministic and checkpoints round trip") {
  leukmil::testing::TempDir dir("det");
  synth::SynthConfig sc;
  Rng rng(26);
  const DatasetManifest m = synth::generate_corpus(sc, {4, 4, 1, 1, 0.25}, dir.path(), rng);
  DetectorTrainConfig cfg;
  cfg.class_map = ClassMap::kBlastNormal;
  cfg.epochs = 2;
  cfg.train_map_floor = 0.0;
  Rng a(5), b(5);
  const TrainedDetector da = train_detector(m, cfg, a);
  const TrainedDetector db = train_detector(m, cfg, b);
  CHECK(da.summary.final_loss == db.summary.final_loss);
  CHECK(da.summary.images_used == 6);

  save_checkpoint(da.model.to_checkpoint(), dir / "d.ckpt");
  const auto loaded = load_detector(dir / "d.ckpt");
  CHECK(loaded->class_map() == ClassMap::kBlastNormal);
  const AnnotatedImage img = m.load_image(m.records.front());
  const DetectionResult ra = detect_cells(da.model, img, 0.05);
  const DetectionResult rb = detect_cells(*loaded, img, 0.05);
  REQUIRE(ra.boxes.size() == rb.boxes.size());
  for (std::size_t k = 0; k < ra.boxes.size(); ++k) {
    CHECK(ra.boxes[k].score == rb.boxes[k].score);
    CHECK(ra.boxes[k].x_min == rb.boxes[k].x_min);
  }
  CHECK_NOTHROW(ra.validate(img.pixels.width, img.pixels.height));
  for (std::size_t k = 1; k < ra.boxes.size(); ++k) CHECK(ra.boxes[k - 1].score >= ra.boxes[k].score);
}
