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

#include <cmath>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "leukmil/core/archive.hpp"
#include "leukmil/core/checkpoint.hpp"
#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/image_io.hpp"
#include "leukmil/core/manifest.hpp"
#include "leukmil/core/metrics.hpp"
#include "leukmil/core/rng.hpp"
#include "support.hpp"

using namespace leukmil;

namespace {

// Exact rational a/b compared with a double.
struct Ratio {
  std::int64_t num;
  std::int64_t den;
};

void check_ratio(const std::optional<double>& got, const Ratio& want) {
  if (want.den == 0) {
    CHECK_FALSE(got.has_value());
    return;
  }
  REQUIRE(got.has_value());
  CHECK(std::abs(*got - static_cast<long double>(want.num) / want.den) <= 1e-12);
}

}  // namespace

TEST_CASE("metrics reproduce the reported confusion") {
  const MetricsReport m = compute_metrics({40, 1, 10, 1});
  CHECK(std::abs(*m.accuracy * 100 - 96.15) < 0.01);
  CHECK(std::abs(*m.sensitivity * 100 - 97.56) < 0.01);
  CHECK(std::abs(*m.specificity * 100 - 90.91) < 0.01);
  CHECK(std::abs(*m.macro_f1 * 100 - 94.24) < 0.01);
  // per-class F1s
  CHECK(*m.f1_all == doctest::Approx(80.0 / 82.0));
  CHECK(*m.f1_healthy == doctest::Approx(20.0 / 22.0));
}

TEST_CASE("degenerate confusions report absent ratios") {
  const MetricsReport m = compute_metrics({7, 0, 0, 0});
  CHECK(*m.accuracy == 1.0);
  CHECK(*m.sensitivity == 1.0);
  CHECK_FALSE(m.specificity.has_value());
  CHECK_FALSE(m.macro_f1.has_value());
  CHECK_THROWS_AS(compute_metrics({0, 0, 0, 0}), InvariantViolation);
  CHECK_THROWS_AS(compute_metrics({-1, 2, 0, 0}), InvariantViolation);
}

TEST_CASE("metrics match a per-sample recount") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 60));
    std::vector<Diagnosis> pred, truth;
    for (int i = 0; i < n; ++i) {
      pred.push_back(rng.bernoulli(0.5) ? Diagnosis::kAll : Diagnosis::kHealthy);
      truth.push_back(rng.bernoulli(0.5) ? Diagnosis::kAll : Diagnosis::kHealthy);
    }
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0, agree = 0;
    for (int i = 0; i < n; ++i) {
      const bool p = pred[i] == Diagnosis::kAll, t = truth[i] == Diagnosis::kAll;
      agree += p == t;
      tp += p && t;
      fp += p && !t;
      tn += !p && !t;
      fn += !p && t;
    }
    const MetricsReport m = compute_metrics(tally(pred, truth));
    CHECK(m.confusion == Confusion{tp, fp, tn, fn});
    check_ratio(m.accuracy, {agree, n});
    check_ratio(m.sensitivity, {tp, tp + fn});
    check_ratio(m.specificity, {tn, tn + fp});
    const Ratio f1a{2 * tp, 2 * tp + fp + fn}, f1h{2 * tn, 2 * tn + fn + fp};
    check_ratio(m.f1_all, f1a);
    check_ratio(m.f1_healthy, f1h);
    if (f1a.den && f1h.den) {
      check_ratio(m.macro_f1, {f1a.num * f1h.den + f1h.num * f1a.den, 2 * f1a.den * f1h.den});
    } else {
      CHECK_FALSE(m.macro_f1.has_value());
    }
  }
}

TEST_CASE("report digest ignores timestamps") {
  MetricsReport r = compute_metrics({1, 2, 3, 4});
  r.name = "x";
  r.config_digest = "abc";
  const std::string d = r.content_digest();
  r.started_at = "2020-01-01T00:00:00Z";
  r.finished_at = utc_timestamp();
  CHECK(r.content_digest() == d);
  r.seed = 5;
  CHECK(r.content_digest() != d);
  MetricsReport back = MetricsReport::from_json(r.to_json());
  CHECK(back.content_digest() == r.content_digest());
  MetricsReport undigested = compute_metrics({1, 0, 0, 0});
  testing::TempDir dir("report");
  CHECK_THROWS_AS(undigested.save(dir / "r.json"), InvariantViolation);
}

TEST_CASE("box geometry") {
  BoundingBox a{0, 0, 10, 10};
  BoundingBox b{5, 0, 15, 10};
  CHECK(iou(a, b) == doctest::Approx(50.0 / 150.0));
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, BoundingBox{20, 20, 30, 30}) == 0.0);
  CHECK_NOTHROW(a.validate(10, 10));
  CHECK_THROWS_AS(a.validate(9, 10), InvariantViolation);
  CHECK_THROWS_AS((BoundingBox{3, 3, 3, 5}).validate(10, 10), InvariantViolation);
  BoundingBox s = a;
  s.score = 1.5;
  CHECK_THROWS_AS(s.validate(10, 10), InvariantViolation);
}

TEST_CASE("cell sequences enforce the bag-label rule") {
  CellCrop blast{"b", Raster(4, 4, 9), CellClass::kBlast, false};
  CellCrop normal{"n", Raster(4, 4, 9), CellClass::kNormal, false};
  CellCrop blank = CellCrop::blank(4);
  CHECK_NOTHROW(CellSequence({blast, blank}, Diagnosis::kAll, 1));
  CHECK_NOTHROW(CellSequence({normal, blank}, Diagnosis::kHealthy, 0));
  CHECK_THROWS_AS(CellSequence({normal, blank}, Diagnosis::kAll, 0), InvariantViolation);
  CHECK_THROWS_AS(CellSequence({blast}, Diagnosis::kHealthy, 1), InvariantViolation);
  // unknown count and inherited labels skip the rule
  CHECK_NOTHROW(CellSequence({normal}, Diagnosis::kAll, -1));
  const CellSequence inherited({normal}, Diagnosis::kAll, 0, CellSequence::LabelSource::kInherited);
  CHECK(inherited.label_source() == CellSequence::LabelSource::kInherited);
  const CellSequence s({blast, blank, normal}, Diagnosis::kAll, 1);
  CHECK(s.pad_mask() == std::vector<bool>{false, true, false});
  CHECK(s.cell_count() == 2);
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  const Rng base(3);
  Rng d1 = base.derive(1), d1b = base.derive(1), d2 = base.derive(2);
  const auto x = d1.next_u64();
  CHECK(x == d1b.next_u64());
  CHECK(x != d2.next_u64());
  Rng u(9);
  for (int i = 0; i < 1000; ++i) {
    const auto v = u.uniform_int(-3, 4);
    CHECK(v >= -3);
    CHECK(v <= 4);
    const double f = u.uniform();
    CHECK(f >= 0.0);
    CHECK(f < 1.0);
  }
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  Sha256 h;
  h.update("a").update("bc");
  CHECK(h.finish() == sha256_hex("abc"));
}

TEST_CASE("tensor archive round trip and corruption") {
  testing::TempDir dir("archive");
  TensorArchive ar;
  ar.meta = {{"k", 1}};
  const std::vector<float> w{1, 2, 3, 4, 5, 6};
  ar.add("w", {2, 3}, w);
  ar.add("b", {3}, std::vector<float>{-1, 0, 1});
  ar.save(dir / "a.lmarc");
  const TensorArchive back = TensorArchive::load(dir / "a.lmarc");
  CHECK(back.get("w").data == w);
  CHECK(back.get("w").shape == std::vector<std::int64_t>{2, 3});
  CHECK(back.meta == ar.meta);
  CHECK(back.parameter_digest() == ar.parameter_digest());
  CHECK_THROWS_AS(ar.add("bad", {4}, w), InvariantViolation);

  std::fstream f(dir / "a.lmarc", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(-2, std::ios::end);
  f.put('\x7f');
  f.close();
  CHECK_THROWS_AS(TensorArchive::load(dir / "a.lmarc"), DigestMismatch);
  CHECK_THROWS_AS(TensorArchive::load(dir / "missing.lmarc"), IoError);
}

TEST_CASE("checkpoints check the frozen extractor digest") {
  testing::TempDir dir("ckpt");
  Checkpoint c;
  c.kind = "aggregator";
  c.stage = 1;
  c.config_digest = "cfg";
  c.extractor_digest = "ex1";
  c.config = {{"a", 2}};
  c.parameters.add("p", {1}, std::vector<float>{0.5f});
  save_checkpoint(c, dir / "c.ckpt");
  const Checkpoint back = load_checkpoint(dir / "c.ckpt", std::string("ex1"));
  CHECK(back.kind == "aggregator");
  CHECK(back.stage == 1);
  CHECK(back.config == c.config);
  CHECK(back.parameters.get("p").data[0] == 0.5f);
  CHECK_THROWS_AS(load_checkpoint(dir / "c.ckpt", std::string("ex2")), DigestMismatch);
}

TEST_CASE("manifest round trip and record errors") {
  testing::TempDir dir("manifest");
  Raster img(16, 16, 128);
  std::filesystem::create_directories(dir / "images");
  write_png(img, (dir / "images/a.png").string());
  DatasetManifest m;
  m.root = dir.path();
  m.synthetic = true;
  ManifestRecord r;
  r.image = "images/a.png";
  r.image_id = "a";
  r.patient_id = "p1";
  r.split = Split::kTest;
  r.diagnosis = Diagnosis::kAll;
  r.boxes.push_back({1, 2, 8, 9, 1.0, CellClass::kBlast});
  m.records.push_back(r);
  save_manifest(m, dir / "manifest.json");
  const DatasetManifest back = load_manifest(dir / "manifest.json");
  REQUIRE(back.records.size() == 1);
  CHECK(back.synthetic);
  CHECK(back.records[0].patient_id == "p1");
  CHECK(back.records[0].boxes[0].cell_class == CellClass::kBlast);
  CHECK(back.load_image(back.records[0]).pixels == img);
  CHECK(back.patients(Split::kTrain).empty());

  std::ofstream bad(dir / "bad.json");
  bad << R"({"version":1,"records":[{"image":"images/a.png","split":"train"},{"image":"nope.png","split":"train"}]})";
  bad.close();
  try {
    load_manifest(dir / "bad.json");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
}

TEST_CASE("png round trip") {
  testing::TempDir dir("png");
  Raster r(5, 3);
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = static_cast<std::uint8_t>(i * 7);
  write_png(r, (dir / "x.png").string());
  CHECK(read_png((dir / "x.png").string()) == r);
}
