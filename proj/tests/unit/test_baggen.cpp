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

#include <map>
#include <set>

#include "doctest.h"
#include "leukmil/baggen/augment.hpp"
#include "leukmil/baggen/pools.hpp"
#include "leukmil/baggen/sequence.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"
#include "support.hpp"

using namespace leukmil;
using namespace leukmil::baggen;

namespace {

CellCrop crop(const std::string& id, CellClass c, std::uint8_t shade) {
  CellCrop out;
  out.crop_id = id;
  out.cell_class = c;
  out.pixels = Raster(16, 16, shade);
  out.pixels.at(3, 5, 0) = 255;  // asymmetric marker
  return out;
}

CellPools make_pools(int blasts, int normals) {
  std::vector<CellCrop> crops;
  for (int i = 0; i < blasts; ++i) crops.push_back(crop("b" + std::to_string(i), CellClass::kBlast, 40));
  for (int i = 0; i < normals; ++i) crops.push_back(crop("n" + std::to_string(i), CellClass::kNormal, 200));
  return build_pools(std::move(crops));
}

// Pearson chi-square statistic against a uniform distribution.
double chi_square(const std::vector<int>& counts) {
  double total = 0;
  for (int c : counts) total += c;
  const double expect = total / counts.size();
  double stat = 0;
  for (int c : counts) stat += (c - expect) * (c - expect) / expect;
  return stat;
}

}  // namespace

TEST_CASE("drawn sequences obey the label rule and slot constraints") {
  Rng rng(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const Diagnosis d = trial % 2 ? Diagnosis::kAll : Diagnosis::kHealthy;
    const SequenceRef s = draw_sequence(30, 30, 15, d, {5, 15}, rng);
    REQUIRE(s.length() == 15);
    int cells = 0, blasts = 0;
    std::set<int> blast_idx, normal_idx;
    for (const auto& e : s.entries) {
      if (e.source == Source::kBlank) {
        CHECK(e.index == -1);
        continue;
      }
      ++cells;
      if (e.source == Source::kBlast) {
        ++blasts;
        CHECK(blast_idx.insert(e.index).second);
      } else {
        CHECK(normal_idx.insert(e.index).second);
      }
    }
    CHECK(cells >= 5);
    CHECK(cells <= 15);
    CHECK(blasts == s.blast_count);
    CHECK((s.label == Diagnosis::kAll) == (blasts >= 1));
    if (blasts > 0) CHECK(s.entries[s.witness_slot].source == Source::kBlast);
    else CHECK(s.witness_slot == -1);
  }
}

TEST_CASE("witness slot, cell count and blast count are uniform") {
  Rng rng(42);
  constexpr int kL = 15, kDraws = 30000;
  std::vector<int> slot(kL, 0), n_count(11, 0);
  std::map<int, std::vector<int>> b_given_n;
  for (int i = 0; i < kDraws; ++i) {
    const SequenceRef s = draw_sequence(60, 60, kL, Diagnosis::kAll, {5, 15}, rng);
    ++slot[s.witness_slot];
    int n = 0;
    for (const auto& e : s.entries) n += e.source != Source::kBlank;
    ++n_count[n - 5];
    auto& v = b_given_n[n];
    v.resize(n, 0);
    ++v[s.blast_count - 1];
  }
  // Critical values at p = 0.001.
  CHECK(chi_square(slot) < 36.12);     // df 14
  CHECK(chi_square(n_count) < 29.59);  // df 10
  CHECK(chi_square(b_given_n[15]) < 36.12);
}

TEST_CASE("draw_sequence rejects impossible requests") {
  Rng rng(43);
  CHECK_THROWS(draw_sequence(10, 10, 15, Diagnosis::kAll, {0, 15}, rng));
  CHECK_THROWS(draw_sequence(10, 10, 15, Diagnosis::kAll, {6, 5}, rng));
  CHECK_THROWS(draw_sequence(10, 10, 10, Diagnosis::kAll, {5, 15}, rng));
  CHECK_THROWS(draw_sequence(0, 10, 15, Diagnosis::kAll, {5, 5}, rng));
  CHECK_THROWS(draw_sequence(10, 3, 15, Diagnosis::kHealthy, {5, 5}, rng));
  CHECK_NOTHROW(draw_sequence(1, 0, 1, Diagnosis::kAll, {1, 1}, rng));
}

TEST_CASE("epochs are balanced and reproducible") {
  Rng a(44), b(44);
  const auto ea = draw_epoch(40, 40, 15, 101, 0.5, {5, 15}, a);
  const auto eb = draw_epoch(40, 40, 15, 101, 0.5, {5, 15}, b);
  REQUIRE(ea.size() == 101);
  int all = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    all += ea[i].label == Diagnosis::kAll;
    CHECK(ea[i].blast_count == eb[i].blast_count);
    CHECK(ea[i].witness_slot == eb[i].witness_slot);
  }
  CHECK(all == 51);  // round(50.5) away from zero
}

TEST_CASE("epoch json round trips through crop ids") {
  leukmil::testing::TempDir dir("epoch");
  const CellPools pools = make_pools(20, 20);
  Rng rng(45);
  const auto epoch = draw_epoch(20, 20, 8, 12, 0.5, {2, 8}, rng);
  const auto j = epoch_to_json(epoch, pools, dir.path());
  CHECK(j.at("length") == 8);
  const auto back = epoch_from_json(j, pools);
  REQUIRE(back.size() == epoch.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == epoch[i].label);
    CHECK(back[i].blast_count == epoch[i].blast_count);
    for (int k = 0; k < 8; ++k) {
      CHECK(back[i].entries[k].source == epoch[i].entries[k].source);
      CHECK(back[i].entries[k].index == epoch[i].entries[k].index);
    }
  }
  auto bad = j;
  bad["sequences"][0]["entries"][0] = "no_such_crop";
  CHECK_THROWS(epoch_from_json(bad, pools));
}

TEST_CASE("materialised sequences carry pool pixels and masks") {
  const CellPools pools = make_pools(10, 10);
  Rng rng(46);
  const CellSequence s = generate_sequence(pools, 12, Diagnosis::kAll, {4, 10}, AugmentationPolicy::none(), rng);
  CHECK(s.length() == 12);
  int blasts = 0;
  for (int k = 0; k < 12; ++k) {
    CHECK(s.pad_mask()[k] == s.entries()[k].is_blank);
    if (!s.entries()[k].is_blank && *s.entries()[k].cell_class == CellClass::kBlast) {
      ++blasts;
      CHECK(s.entries()[k].pixels.at(0, 0, 1) == 40);
    }
  }
  CHECK(blasts == s.blast_count());
  CHECK(s.label() == Diagnosis::kAll);
}

TEST_CASE("bag packing") {
  PatientBag bag;
  bag.patient_id = "p";
  bag.diagnosis = Diagnosis::kAll;
  for (int i = 0; i < 33; ++i) bag.cells.push_back(crop("c" + std::to_string(i), i == 20 ? CellClass::kBlast : CellClass::kNormal, 90));
  const auto chunks = bag_to_sequences(bag, 15, Packing::kChunk);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[2].cell_count() == 3);
  CHECK(chunks[2].length() == 15);
  for (const auto& c : chunks) {
    CHECK(c.label() == Diagnosis::kAll);
    CHECK(c.label_source() == CellSequence::LabelSource::kInherited);
  }
  CHECK(chunks[0].blast_count() == 0);
  CHECK(chunks[1].blast_count() == 1);
  CHECK(chunks[0].entries()[0].crop_id == "c0");
  const auto single = bag_to_sequences(bag, 15, Packing::kSingle);
  REQUIRE(single.size() == 1);
  CHECK(single[0].length() == 33);
  bag.cells[3].cell_class.reset();
  CHECK(bag_to_sequences(bag, 15)[0].blast_count() == -1);
  CHECK(parse_packing("single") == Packing::kSingle);
  CHECK_THROWS_AS(parse_packing("stack"), ConfigError);
}

TEST_CASE("sequence digest tracks content") {
  const CellPools pools = make_pools(6, 6);
  Rng a(47), b(47);
  const auto sa = generate_sequence(pools, 6, Diagnosis::kAll, {3, 6}, AugmentationPolicy::none(), a);
  const auto sb = generate_sequence(pools, 6, Diagnosis::kAll, {3, 6}, AugmentationPolicy::none(), b);
  CHECK(sequence_digest(sa) == sequence_digest(sb));
  const auto sc = generate_sequence(pools, 6, Diagnosis::kHealthy, {3, 6}, AugmentationPolicy::none(), a);
  CHECK(sequence_digest(sa) != sequence_digest(sc));
}

TEST_CASE("augmentation is rigid and label preserving") {
  const CellCrop c = crop("x", CellClass::kBlast, 77);
  RigidTransform flip;
  flip.flip_h = true;
  const Raster once = apply_transform(c.pixels, flip);
  CHECK(once.at(16 - 1 - 3, 5, 0) == 255);
  CHECK(apply_transform(once, flip) == c.pixels);
  CHECK(apply_transform(c.pixels, RigidTransform{}) == c.pixels);
  RigidTransform rot;
  rot.angle_deg = 360.0;
  CHECK(apply_transform(c.pixels, rot) == c.pixels);

  Rng rng(48);
  for (int i = 0; i < 20; ++i) {
    const CellCrop a = augment(c, AugmentationPolicy::standard(), rng);
    CHECK(a.crop_id == "x");
    CHECK(a.cell_class == CellClass::kBlast);
    CHECK(a.pixels.width == 16);
  }
  CHECK_THROWS_AS(augment(CellCrop::blank(16), AugmentationPolicy::standard(), rng), InvariantViolation);
  CHECK_THROWS_AS(AugmentationPolicy::from_json({{"shear", true}}), ConfigError);
  CHECK(AugmentationPolicy::from_json(AugmentationPolicy::standard().to_json()).to_json() ==
        AugmentationPolicy::standard().to_json());
}

TEST_CASE("pools validate, split and persist") {
  leukmil::testing::TempDir dir("pools");
  CellPools p = make_pools(10, 20);
  CHECK_NOTHROW(p.validate());
  CHECK(p.crop_size() == 16);
  Rng rng(49);
  const auto [train, hold] = split_pools(p, 0.2, rng);
  CHECK(hold.blast.size() == 2);
  CHECK(hold.normal.size() == 4);
  CHECK(train.size() + hold.size() == p.size());
  save_pools(p, dir.path());
  const CellPools back = load_pools(dir.path());
  REQUIRE(back.blast.size() == 10);
  CHECK(back.blast[3].pixels == p.blast[3].pixels);
  CHECK(back.normal[0].crop_id == p.normal[0].crop_id);
  p.blast.push_back(p.blast.front());
  CHECK_THROWS_AS(p.validate(), InvariantViolation);
  CHECK_THROWS(build_pools({CellCrop::blank(16)}));
}
