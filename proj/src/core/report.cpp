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

#include "leukmil/core/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"

namespace leukmil {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json MetricsReport::to_json() const {
  return {{"name", name},
          {"seed", seed},
          {"config_digest", config_digest},
          {"timestamps", {{"started", started_at}, {"finished", finished_at}}},
          {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}}},
          {"n", confusion.total()},
          {"accuracy", optional_json(accuracy)},
          {"sensitivity", optional_json(sensitivity)},
          {"specificity", optional_json(specificity)},
          {"macro_f1", optional_json(macro_f1)},
          {"f1_per_class", {{"ALL", optional_json(f1_all)}, {"HEALTHY", optional_json(f1_healthy)}}},
          {"extra", extra}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  r.name = j.value("name", std::string());
  r.seed = j.value("seed", std::uint64_t{0});
  r.config_digest = j.value("config_digest", std::string());
  if (j.contains("timestamps")) {
    r.started_at = j["timestamps"].value("started", std::string());
    r.finished_at = j["timestamps"].value("finished", std::string());
  }
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(), c.at("tn").get<std::int64_t>(),
                 c.at("fn").get<std::int64_t>()};
  r.accuracy = optional_from(j, "accuracy");
  r.sensitivity = optional_from(j, "sensitivity");
  r.specificity = optional_from(j, "specificity");
  r.macro_f1 = optional_from(j, "macro_f1");
  if (j.contains("f1_per_class")) {
    r.f1_all = optional_from(j["f1_per_class"], "ALL");
    r.f1_healthy = optional_from(j["f1_per_class"], "HEALTHY");
  }
  r.extra = j.value("extra", json::object());
  return r;
}

std::string MetricsReport::content_digest() const {
  json j = to_json();
  j.erase("timestamps");
  return sha256_hex(j.dump());
}

void MetricsReport::save(const std::filesystem::path& path) const {
  if (config_digest.empty()) throw InvariantViolation("report '" + name + "' has no config digest");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report '" + path.string() + "'");
  out << to_json().dump(2) << '\n';
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace leukmil
