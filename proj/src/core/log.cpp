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

#include "leukmil/core/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace leukmil::log {

namespace {
std::atomic<Level> g_level{Level::kInfo};
std::mutex g_mutex;

const char* level_name(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    case Level::kOff: return "off";
  }
  return "info";
}
}  // namespace

void set_level(Level l) { g_level = l; }
Level level() { return g_level; }

void emit(Level l, std::string_view event, const nlohmann::json& fields) {
  if (l < g_level.load() || g_level.load() == Level::kOff) return;
  nlohmann::json line = {{"level", level_name(l)}, {"event", event}};
  for (auto it = fields.begin(); it != fields.end(); ++it) line[it.key()] = it.value();
  const std::string text = line.dump();
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "%s\n", text.c_str());
}

}  // namespace leukmil::log
