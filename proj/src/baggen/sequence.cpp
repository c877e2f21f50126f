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

#include "leukmil/baggen/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"

namespace leukmil::baggen {

namespace {

// k distinct indices from [0, n), by rejection (k is at most a sequence length).
std::vector<int> sample_distinct(std::size_t n, int k, Rng& rng) {
  std::vector<int> out;
  out.reserve(k);
  while (static_cast<int>(out.size()) < k) {
    const int v = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

}  // namespace

SequenceRef draw_sequence(std::size_t blast_pool, std::size_t normal_pool, int length, Diagnosis label,
                          CellRange range, Rng& rng) {
  if (range.lo < 1 || range.lo > range.hi) throw ConfigError("cell range must satisfy 1 <= lo <= hi");
  if (range.hi > length) throw ConfigError("cell range upper bound exceeds sequence length");
  const int n = static_cast<int>(rng.uniform_int(range.lo, range.hi));
  const int b = label == Diagnosis::kAll ? static_cast<int>(rng.uniform_int(1, n)) : 0;
  if (static_cast<std::size_t>(b) > blast_pool) throw InvariantViolation("blast pool exhausted");
  if (static_cast<std::size_t>(n - b) > normal_pool) throw InvariantViolation("normal pool exhausted");

  SequenceRef ref;
  ref.label = label;
  ref.blast_count = b;
  ref.entries.reserve(length);
  const std::vector<int> blasts = sample_distinct(blast_pool, b, rng);
  for (int i : blasts) ref.entries.push_back({Source::kBlast, i});
  for (int i : sample_distinct(normal_pool, n - b, rng)) ref.entries.push_back({Source::kNormal, i});
  ref.entries.resize(length);
  rng.shuffle(std::span<EntryRef>(ref.entries));
  if (!blasts.empty()) {
    for (int slot = 0; slot < length; ++slot) {
      if (ref.entries[slot].source == Source::kBlast && ref.entries[slot].index == blasts.front()) {
        ref.witness_slot = slot;
      }
    }
  }
  return ref;
}

std::vector<SequenceRef> draw_epoch(std::size_t blast_pool, std::size_t normal_pool, int length, int n_sequences,
                                    double balance, CellRange range, Rng& rng) {
  if (n_sequences < 1) throw ConfigError("epoch needs at least one sequence");
  if (!(balance >= 0.0 && balance <= 1.0)) throw ConfigError("class balance must lie in [0,1]");
  const int n_all = static_cast<int>(std::lround(balance * n_sequences));
  std::vector<Diagnosis> labels(n_sequences, Diagnosis::kHealthy);
  std::fill(labels.begin(), labels.begin() + n_all, Diagnosis::kAll);
  rng.shuffle(std::span<Diagnosis>(labels));
  const Rng base(rng.next_u64());
  std::vector<SequenceRef> epoch;
  epoch.reserve(n_sequences);
  for (int i = 0; i < n_sequences; ++i) {
    Rng sub = base.derive(static_cast<std::uint64_t>(i));
    epoch.push_back(draw_sequence(blast_pool, normal_pool, length, labels[i], range, sub));
  }
  return epoch;
}

CellSequence materialize(const SequenceRef& ref, const CellPools& pools, const AugmentationPolicy& policy, Rng& rng) {
  const int side = pools.crop_size();
  std::vector<CellCrop> entries;
  entries.reserve(ref.entries.size());
  for (const auto& e : ref.entries) {
    if (e.source == Source::kBlank) {
      entries.push_back(CellCrop::blank(side));
      continue;
    }
    const auto& pool = e.source == Source::kBlast ? pools.blast : pools.normal;
    entries.push_back(augment(pool.at(e.index), policy, rng));
  }
  return CellSequence(std::move(entries), ref.label, ref.blast_count);
}

CellSequence generate_sequence(const CellPools& pools, int length, Diagnosis label, CellRange range,
                               const AugmentationPolicy& policy, Rng& rng) {
  const SequenceRef ref = draw_sequence(pools.blast.size(), pools.normal.size(), length, label, range, rng);
  return materialize(ref, pools, policy, rng);
}

std::vector<CellSequence> generate_epoch(const CellPools& pools, int length, int n_sequences, double balance,
                                         CellRange range, const AugmentationPolicy& policy, Rng& rng) {
  const auto refs = draw_epoch(pools.blast.size(), pools.normal.size(), length, n_sequences, balance, range, rng);
  Rng aug = rng.derive(1);
  std::vector<CellSequence> out;
  out.reserve(refs.size());
  for (const auto& ref : refs) out.push_back(materialize(ref, pools, policy, aug));
  return out;
}

std::string_view to_string(Packing p) { return p == Packing::kChunk ? "chunk" : "single"; }

Packing parse_packing(std::string_view s) {
  if (s == "chunk") return Packing::kChunk;
  if (s == "single") return Packing::kSingle;
  throw ConfigError("unknown packing '" + std::string(s) + "' (expected chunk or single)");
}

std::vector<CellSequence> bag_to_sequences(const PatientBag& bag, int length, Packing packing) {
  if (bag.cells.empty()) throw InvariantViolation("bag '" + bag.patient_id + "' has no cells");
  const std::size_t n = bag.cells.size();
  const std::size_t step = packing == Packing::kSingle ? n : static_cast<std::size_t>(length);
  if (step < 1) throw ConfigError("sequence length must be >= 1");
  const int side = bag.cells.front().pixels.width;
  std::vector<CellSequence> out;
  for (std::size_t start = 0; start < n; start += step) {
    std::vector<CellCrop> entries(bag.cells.begin() + static_cast<std::ptrdiff_t>(start),
                                  bag.cells.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + step)));
    int blasts = 0;
    for (const auto& c : entries) {
      if (!c.cell_class) {
        blasts = -1;
        break;
      }
      if (*c.cell_class == CellClass::kBlast) ++blasts;
    }
    while (entries.size() < step) entries.push_back(CellCrop::blank(side));
    out.emplace_back(std::move(entries), bag.diagnosis, blasts, CellSequence::LabelSource::kInherited);
  }
  return out;
}

std::string sequence_digest(const CellSequence& sequence) {
  Sha256 sha;
  for (const auto& e : sequence.entries()) {
    sha.update(e.crop_id);
    sha.update_pod(std::span<const std::uint8_t>(e.pixels.data));
  }
  sha.update(to_string(sequence.label()));
  sha.update(std::to_string(sequence.blast_count()));
  return sha.finish();
}

nlohmann::json epoch_to_json(const std::vector<SequenceRef>& epoch, const CellPools& pools,
                             const std::filesystem::path& pools_dir) {
  nlohmann::json seqs = nlohmann::json::array();
  int length = 0;
  for (const auto& ref : epoch) {
    length = ref.length();
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : ref.entries) {
      if (e.source == Source::kBlank) {
        entries.push_back(nullptr);
      } else {
        entries.push_back((e.source == Source::kBlast ? pools.blast : pools.normal).at(e.index).crop_id);
      }
    }
    seqs.push_back({{"label", std::string(to_string(ref.label))}, {"blast_count", ref.blast_count},
                    {"entries", entries}});
  }
  return {{"version", 1}, {"length", length}, {"pools", pools_dir.string()}, {"sequences", seqs}};
}

std::vector<SequenceRef> epoch_from_json(const nlohmann::json& j, const CellPools& pools) {
  std::map<std::string, EntryRef> index;
  for (std::size_t i = 0; i < pools.blast.size(); ++i) index[pools.blast[i].crop_id] = {Source::kBlast, static_cast<int>(i)};
  for (std::size_t i = 0; i < pools.normal.size(); ++i) {
    index[pools.normal[i].crop_id] = {Source::kNormal, static_cast<int>(i)};
  }
  std::vector<SequenceRef> out;
  for (const auto& s : j.at("sequences")) {
    SequenceRef ref;
    ref.label = parse_diagnosis(s.at("label").get<std::string>());
    ref.blast_count = s.at("blast_count").get<int>();
    int blasts = 0;
    for (const auto& e : s.at("entries")) {
      if (e.is_null()) {
        ref.entries.push_back({});
        continue;
      }
      const auto it = index.find(e.get<std::string>());
      if (it == index.end()) throw FormatError("epoch references unknown crop '" + e.get<std::string>() + "'");
      if (it->second.source == Source::kBlast) ++blasts;
      ref.entries.push_back(it->second);
    }
    if (blasts != ref.blast_count || (ref.label == Diagnosis::kAll) != (blasts >= 1)) {
      throw FormatError("epoch sequence contradicts its label or blast count");
    }
    out.push_back(std::move(ref));
  }
  return out;
}

}  // namespace leukmil::baggen
