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
#include <set>

#include "doctest.h"
#include "leukmil/core/error.hpp"
#include "leukmil/core/manifest.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/synth/generator.hpp"
#include "support.hpp"

using namespace leukmil;
using namespace leukmil::synth;

TEST_CASE("infeasible configs are rejected") {
  SynthConfig c;
  CHECK_NOTHROW(c.validate());
  c.blast_nucleus_radius = {5.0, 6.0};  // overlaps the normal range
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.cells_max = 40;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.cells_min = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config json round trip") {
  SynthConfig c;
  c.blast_fraction = 0.2;
  c.cells_max = 5;
  const SynthConfig back = SynthConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("patients obey the diagnosis rule") {
  SynthConfig c;
  c.blast_fraction = 0.05;  // low rate forces the at-least-one-blast repair
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto all = generate_patient(c, Diagnosis::kAll, 1, "a" + std::to_string(i), rng);
    CHECK(all.blast_count() >= 1);
    CHECK(*all.bag.blast_count() == all.blast_count());
    const auto healthy = generate_patient(c, Diagnosis::kHealthy, 2, "h" + std::to_string(i), rng);
    CHECK(healthy.blast_count() == 0);
    CHECK(healthy.bag.diagnosis == Diagnosis::kHealthy);
  }
}

TEST_CASE("rendered boxes are valid, labelled and disjoint") {
  SynthConfig c;
  Rng rng(12);
  const auto p = generate_patient(c, Diagnosis::kAll, 6, "p", rng);
  for (const auto& g : p.images) {
    CHECK_NOTHROW(g.image.validate());
    REQUIRE(g.image.boxes.size() == g.cells.size());
    CHECK(static_cast<int>(g.cells.size()) >= c.cells_min);
    CHECK(static_cast<int>(g.cells.size()) <= c.cells_max);
    for (std::size_t i = 0; i < g.image.boxes.size(); ++i) {
      CHECK(g.image.boxes[i].cell_class.has_value());
      for (std::size_t j = i + 1; j < g.image.boxes.size(); ++j) CHECK(iou(g.image.boxes[i], g.image.boxes[j]) == 0.0);
    }
  }
  CHECK(p.bag.cells.size() == std::accumulate(p.images.begin(), p.images.end(), std::size_t{0},
                                               [](std::size_t s, const GeneratedImage& g) { return s + g.cells.size(); }));
}

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig c;
  Rng a(99), b(99), d(100);
  const auto pa = generate_patient(c, Diagnosis::kAll, 2, "p", a);
  const auto pb = generate_patient(c, Diagnosis::kAll, 2, "p", b);
  const auto pd = generate_patient(c, Diagnosis::kAll, 2, "p", d);
  REQUIRE(pa.images.size() == pb.images.size());
  for (std::size_t i = 0; i < pa.images.size(); ++i) CHECK(pa.images[i].image.pixels == pb.images[i].image.pixels);
  CHECK_FALSE(pa.images[0].image.pixels == pd.images[0].image.pixels);
}

TEST_CASE("nucleus area separates the two classes") {
  SynthConfig c;
  Rng rng(13);
  std::vector<std::pair<double, bool>> scored;
  for (int i = 0; i < 30; ++i) {
    const auto p = generate_patient(c, Diagnosis::kAll, 2, "p" + std::to_string(i), rng);
    for (const auto& cell : p.bag.cells)
      scored.emplace_back(nucleus_pixel_fraction(cell.pixels), *cell.cell_class == CellClass::kBlast);
  }
  REQUIRE(scored.size() > 200);
  // Best single threshold classifier.
  std::sort(scored.begin(), scored.end());
  std::size_t blasts_above = std::count_if(scored.begin(), scored.end(), [](auto& s) { return s.second; });
  std::size_t normals_below = 0, best = 0;
  for (const auto& [score, blast] : scored) {
    best = std::max(best, normals_below + blasts_above);
    if (blast) --blasts_above; else ++normals_below;
  }
  CHECK(static_cast<double>(best) / scored.size() >= 0.98);
}

TEST_CASE("corpus writes a loadable stratified manifest") {
  leukmil::testing::TempDir dir("synth");
  SynthConfig c;
  CorpusOptions o{6, 6, 1, 2, 0.34};
  Rng rng(14);
  const DatasetManifest m = generate_corpus(c, o, dir.path(), rng);
  CHECK(m.synthetic);
  const DatasetManifest back = load_manifest(dir / "manifest.json");
  CHECK(back.synthetic);
  CHECK(back.records.size() == m.records.size());
  CHECK(back.patients().size() == 12);
  std::set<std::string> test_all, test_healthy;
  for (const auto* r : back.split(Split::kTest))
    (*r->diagnosis == Diagnosis::kAll ? test_all : test_healthy).insert(r->patient_id);
  CHECK(test_all.size() == 2);
  CHECK(test_healthy.size() == 2);
  // Patients never straddle splits.
  std::set<std::string> train;
  for (const auto* r : back.split(Split::kTrain)) train.insert(r->patient_id);
  for (const auto& pid : test_all) CHECK(train.count(pid) == 0);
  const AnnotatedImage img = back.load_image(back.records.front());
  CHECK(img.pixels.width == c.image_width);
}
