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

#include "leukmil/core/checkpoint.hpp"

#include "leukmil/core/error.hpp"

namespace leukmil {

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  TensorArchive archive = checkpoint.parameters;
  archive.meta = {{"checkpoint_version", kCheckpointVersion},
                  {"kind", checkpoint.kind},
                  {"stage", checkpoint.stage},
                  {"config_digest", checkpoint.config_digest},
                  {"extractor_digest", checkpoint.extractor_digest},
                  {"config", checkpoint.config}};
  archive.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_extractor_digest) {
  TensorArchive archive = TensorArchive::load(path);
  const auto& meta = archive.meta;
  const int version = meta.value("checkpoint_version", -1);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint '" + path.string() + "' has version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  ckpt.kind = meta.value("kind", std::string());
  ckpt.stage = meta.value("stage", 0);
  ckpt.config_digest = meta.value("config_digest", std::string());
  ckpt.extractor_digest = meta.value("extractor_digest", std::string());
  ckpt.config = meta.value("config", nlohmann::json::object());
  if (expected_extractor_digest && *expected_extractor_digest != ckpt.extractor_digest) {
    throw DigestMismatch("checkpoint '" + path.string() + "' was trained against extractor " +
                         ckpt.extractor_digest + " but extractor " + *expected_extractor_digest + " is loaded");
  }
  archive.meta = nlohmann::json::object();
  ckpt.parameters = std::move(archive);
  return ckpt;
}

}  // namespace leukmil
