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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace leukmil {

struct StoredTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

// Single-file container of named float32 tensors plus a JSON metadata block.
//
// Layout: 8-byte magic "LMILARC1", little-endian u64 header length, UTF-8
// JSON header, then the tensors' raw float32 data back to back. The header
// records each tensor's name, shape and element offset together with the
// SHA-256 of the payload, which load() verifies.
class TensorArchive {
 public:
  nlohmann::json meta = nlohmann::json::object();

  void add(std::string name, std::vector<std::int64_t> shape, std::span<const float> data);
  bool contains(const std::string& name) const;
  const StoredTensor& get(const std::string& name) const;
  const std::vector<StoredTensor>& tensors() const { return tensors_; }

  // Digest over names, shapes and values, independent of metadata.
  std::string parameter_digest() const;

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::vector<StoredTensor> tensors_;
};

}  // namespace leukmil
