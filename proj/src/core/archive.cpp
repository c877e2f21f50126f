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

#include "leukmil/core/archive.hpp"

#include <cstring>
#include <fstream>
#include <numeric>

#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"

namespace leukmil {

namespace {

constexpr char kMagic[8] = {'L', 'M', 'I', 'L', 'A', 'R', 'C', '1'};

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

std::string payload_digest(const std::vector<StoredTensor>& tensors) {
  Sha256 sha;
  for (const auto& t : tensors) sha.update_pod(std::span<const float>(t.data));
  return sha.finish();
}

}  // namespace

void TensorArchive::add(std::string name, std::vector<std::int64_t> shape, std::span<const float> data) {
  if (element_count(shape) != static_cast<std::int64_t>(data.size())) {
    throw InvariantViolation("tensor '" + name + "' shape does not match its data");
  }
  if (contains(name)) throw InvariantViolation("duplicate tensor '" + name + "'");
  tensors_.push_back({std::move(name), std::move(shape), std::vector<float>(data.begin(), data.end())});
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const StoredTensor& TensorArchive::get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw FormatError("archive has no tensor '" + name + "'");
}

std::string TensorArchive::parameter_digest() const {
  Sha256 sha;
  for (const auto& t : tensors_) {
    sha.update(t.name);
    sha.update_pod(std::span<const std::int64_t>(t.shape));
    sha.update_pod(std::span<const float>(t.data));
  }
  return sha.finish();
}

void TensorArchive::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["meta"] = meta;
  header["payload_sha256"] = payload_digest(tensors_);
  auto& list = header["tensors"] = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& t : tensors_) {
    list.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += static_cast<std::int64_t>(t.data.size());
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write archive '" + path.string() + "'");
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors_) {
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing archive '" + path.string() + "'");
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open archive '" + path.string() + "'");
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("'" + path.string() + "' is not a tensor archive");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated archive header in '" + path.string() + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt archive header in '" + path.string() + "': " + e.what());
  }

  TensorArchive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    StoredTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    t.data.resize(static_cast<std::size_t>(element_count(t.shape)));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw FormatError("truncated tensor '" + t.name + "' in '" + path.string() + "'");
    archive.tensors_.push_back(std::move(t));
  }
  if (payload_digest(archive.tensors_) != header.value("payload_sha256", std::string())) {
    throw DigestMismatch("payload digest mismatch in archive '" + path.string() + "'");
  }
  return archive;
}

}  // namespace leukmil
