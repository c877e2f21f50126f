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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

namespace leukmil {

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

// Confusion-derived metrics plus experiment metadata. A metric whose
// denominator is zero is absent rather than zero.
struct MetricsReport {
  std::string name;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string started_at;
  std::string finished_at;

  Confusion confusion;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> macro_f1;
  std::optional<double> f1_all;
  std::optional<double> f1_healthy;

  // Free-form experiment payload (per-class tables, flags, curves).
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);

  // Digest of every field except the wall-clock timestamps.
  std::string content_digest() const;

  void save(const std::filesystem::path& path) const;
};

std::string utc_timestamp();

}  // namespace leukmil
