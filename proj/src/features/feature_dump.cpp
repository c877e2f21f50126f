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

#include "leukmil/features/feature_dump.hpp"

#include <fstream>

#include "json.hpp"
#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"

namespace leukmil::features {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return stem.string() + suffix;
}

}  // namespace

void write_feature_dump(const FeatureDump& dump, const std::filesystem::path& stem) {
  if (static_cast<Eigen::Index>(dump.ids.size()) != dump.features.rows()) {
    throw InvariantViolation("feature dump needs one id per row");
  }
  const auto bin = with_suffix(stem, ".bin");
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw IoError("cannot write '" + bin.string() + "'");
    out.write(reinterpret_cast<const char*>(dump.features.data()),
              static_cast<std::streamsize>(dump.features.size() * sizeof(float)));
    if (!out) throw IoError("failed writing '" + bin.string() + "'");
  }
  const nlohmann::json sidecar{
      {"shape", {dump.features.rows(), dump.features.cols()}},
      {"dtype", "float32"},
      {"backbone", dump.backbone},
      {"digest", dump.digest},
      {"data_sha256", sha256_file(bin)},
      {"ids", dump.ids}};
  std::ofstream meta(with_suffix(stem, ".json"));
  meta << sidecar.dump(1) << '\n';
  if (!meta) throw IoError("cannot write feature sidecar for '" + stem.string() + "'");
}

FeatureDump read_feature_dump(const std::filesystem::path& stem) {
  const auto json_path = with_suffix(stem, ".json");
  const auto bin = with_suffix(stem, ".bin");
  std::ifstream meta(json_path);
  if (!meta) throw IoError("cannot open '" + json_path.string() + "'");
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt feature sidecar '" + json_path.string() + "': " + e.what());
  }
  if (sidecar.value("dtype", "") != "float32") throw FormatError("feature dump dtype must be float32");
  if (sidecar.contains("data_sha256") && sidecar["data_sha256"].get<std::string>() != sha256_file(bin)) {
    throw DigestMismatch("feature data '" + bin.string() + "' does not match its sidecar digest");
  }
  FeatureDump dump;
  dump.backbone = sidecar.at("backbone").get<std::string>();
  dump.digest = sidecar.at("digest").get<std::string>();
  dump.ids = sidecar.at("ids").get<std::vector<std::string>>();
  const auto shape = sidecar.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 || shape[0] != static_cast<Eigen::Index>(dump.ids.size())) {
    throw FormatError("feature sidecar shape does not match its ids");
  }
  dump.features.resize(shape[0], shape[1]);
  std::ifstream in(bin, std::ios::binary);
  in.read(reinterpret_cast<char*>(dump.features.data()),
          static_cast<std::streamsize>(dump.features.size() * sizeof(float)));
  if (!in) throw FormatError("truncated feature data '" + bin.string() + "'");
  return dump;
}

}  // namespace leukmil::features
