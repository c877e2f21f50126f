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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "leukmil/baggen/augment.hpp"
#include "leukmil/baggen/pools.hpp"

namespace leukmil::baggen {

inline constexpr int kDefaultSequenceLength = 15;

struct CellRange {
  int lo = 5;
  int hi = 15;
};

enum class Source { kBlast, kNormal, kBlank };

// A sequence slot as a reference into the pools instead of pixels.
struct EntryRef {
  Source source = Source::kBlank;
  int index = -1;  // pool index; -1 for blanks
};

struct SequenceRef {
  std::vector<EntryRef> entries;
  Diagnosis label = Diagnosis::kHealthy;
  int blast_count = 0;
  int witness_slot = -1;  // slot of the first blast drawn; -1 without blasts

  int length() const { return static_cast<int>(entries.size()); }
};

// Draws n ~ U[lo, hi] cells, b ~ U[1, n] of them blasts for ALL (b = 0 for
// HEALTHY), without replacement inside the sequence, pads to L with blanks and
// shuffles all L slots. Throws unless 1 <= lo <= hi <= L, or when a pool is too
// small.
SequenceRef draw_sequence(std::size_t blast_pool, std::size_t normal_pool, int length, Diagnosis label,
                          CellRange range, Rng& rng);

// Exactly round(n * balance) ALL sequences, in shuffled order. Sequence i
// draws from its own sub-stream of one seed taken from `rng`.
std::vector<SequenceRef> draw_epoch(std::size_t blast_pool, std::size_t normal_pool, int length, int n_sequences,
                                    double balance, CellRange range, Rng& rng);

// Resolves references to pixels, augmenting each non-blank entry.
CellSequence materialize(const SequenceRef& ref, const CellPools& pools, const AugmentationPolicy& policy, Rng& rng);

CellSequence generate_sequence(const CellPools& pools, int length, Diagnosis label, CellRange range,
                               const AugmentationPolicy& policy, Rng& rng);

std::vector<CellSequence> generate_epoch(const CellPools& pools, int length, int n_sequences, double balance,
                                         CellRange range, const AugmentationPolicy& policy, Rng& rng);

enum class Packing { kChunk, kSingle };
std::string_view to_string(Packing p);
Packing parse_packing(std::string_view s);

// Evaluation packing of a patient bag. Chunk mode splits the cells in order
// into ceil(|cells| / L) sequences and blank-pads the last; single mode emits
// one sequence holding every cell. Labels are inherited from the bag;
// blast_count is the chunk's ground-truth count, or -1 when any cell is
// unlabelled.
std::vector<CellSequence> bag_to_sequences(const PatientBag& bag, int length, Packing packing = Packing::kChunk);

// SHA-256 over entry ids, pixels, label and blast count.
std::string sequence_digest(const CellSequence& sequence);

// Crop-reference epoch file: {"length", "pools", "sequences": [{label,
// blast_count, entries: ["crop id" | null]}]}.
nlohmann::json epoch_to_json(const std::vector<SequenceRef>& epoch, const CellPools& pools,
                             const std::filesystem::path& pools_dir);
std::vector<SequenceRef> epoch_from_json(const nlohmann::json& j, const CellPools& pools);

}  // namespace leukmil::baggen
