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

#include "leukmil/baggen/pools.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/image_io.hpp"

namespace leukmil::baggen {

int CellPools::crop_size() const {
  if (!blast.empty()) return blast.front().pixels.width;
  if (!normal.empty()) return normal.front().pixels.width;
  return 0;
}

void CellPools::validate() const {
  std::set<std::string> ids;
  const int side = crop_size();
  auto check = [&](const std::vector<CellCrop>& pool, CellClass expected) {
    for (const auto& crop : pool) {
      if (crop.is_blank) throw InvariantViolation("pool contains a blank crop");
      if (crop.cell_class != expected) {
        throw InvariantViolation("crop '" + crop.crop_id + "' is in the " + std::string(to_string(expected)) +
                                 " pool with a different label");
      }
      if (crop.pixels.width != side || crop.pixels.height != side) {
        throw InvariantViolation("pool crops must share one square size");
      }
      if (!ids.insert(crop.crop_id).second) throw InvariantViolation("duplicate crop id '" + crop.crop_id + "'");
    }
  };
  check(blast, CellClass::kBlast);
  check(normal, CellClass::kNormal);
}

CellPools build_pools(std::vector<CellCrop> crops) {
  CellPools pools;
  for (auto& crop : crops) {
    if (crop.is_blank) throw InvariantViolation("blank crops cannot enter a pool");
    if (!crop.cell_class) throw InvariantViolation("crop '" + crop.crop_id + "' has no cell class");
    (*crop.cell_class == CellClass::kBlast ? pools.blast : pools.normal).push_back(std::move(crop));
  }
  pools.validate();
  return pools;
}

CellPools pools_from_manifest(const DatasetManifest& manifest, std::optional<Split> split, int crop_size) {
  std::vector<CellCrop> crops;
  for (const auto& record : manifest.records) {
    if (split && record.split != *split) continue;
    const AnnotatedImage image = manifest.load_image(record);
    for (std::size_t k = 0; k < image.boxes.size(); ++k) {
      const BoundingBox& b = image.boxes[k];
      CellCrop crop;
      crop.crop_id = image.image_id + "#" + std::to_string(k);
      crop.pixels = crop_resize_pad(image.pixels, static_cast<int>(std::floor(b.x_min)),
                                    static_cast<int>(std::floor(b.y_min)), static_cast<int>(std::ceil(b.x_max)),
                                    static_cast<int>(std::ceil(b.y_max)), crop_size);
      crop.cell_class = b.cell_class;
      crops.push_back(std::move(crop));
    }
  }
  return build_pools(std::move(crops));
}

std::pair<CellPools, CellPools> split_pools(const CellPools& pools, double holdout_fraction, Rng& rng) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0,1)");
  CellPools train, held;
  auto split_one = [&](const std::vector<CellCrop>& pool, std::vector<CellCrop>& a, std::vector<CellCrop>& b) {
    if (pool.size() < 2) throw InvariantViolation("each pool needs at least two crops to split");
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    auto n_held = static_cast<std::size_t>(std::lround(holdout_fraction * static_cast<double>(pool.size())));
    n_held = std::clamp<std::size_t>(n_held, 1, pool.size() - 1);
    for (std::size_t k = 0; k < order.size(); ++k) (k < n_held ? b : a).push_back(pool[order[k]]);
  };
  split_one(pools.blast, train.blast, held.blast);
  split_one(pools.normal, train.normal, held.normal);
  return {std::move(train), std::move(held)};
}

void save_pools(const CellPools& pools, const std::filesystem::path& dir) {
  pools.validate();
  std::filesystem::create_directories(dir / "crops");
  nlohmann::json list = nlohmann::json::array();
  auto write = [&](const std::vector<CellCrop>& pool, char tag) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%c%05zu.png", tag, i);
      write_png(pool[i].pixels, dir / "crops" / name);
      list.push_back({{"crop_id", pool[i].crop_id},
                      {"class", std::string(to_string(*pool[i].cell_class))},
                      {"file", std::string("crops/") + name}});
    }
  };
  write(pools.blast, 'b');
  write(pools.normal, 'n');
  std::ofstream out(dir / "pools.json");
  out << nlohmann::json{{"version", 1}, {"crop_size", pools.crop_size()}, {"crops", list}}.dump(1) << '\n';
  if (!out) throw IoError("cannot write '" + (dir / "pools.json").string() + "'");
}

CellPools load_pools(const std::filesystem::path& dir) {
  const auto path = dir / "pools.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt pools file '" + path.string() + "': " + e.what());
  }
  if (j.value("version", 0) != 1) throw FormatError("unsupported pools version in '" + path.string() + "'");
  std::vector<CellCrop> crops;
  for (const auto& entry : j.at("crops")) {
    CellCrop crop;
    crop.crop_id = entry.at("crop_id").get<std::string>();
    crop.cell_class = parse_cell_class(entry.at("class").get<std::string>());
    crop.pixels = read_png(dir / entry.at("file").get<std::string>());
    crops.push_back(std::move(crop));
  }
  return build_pools(std::move(crops));
}

}  // namespace leukmil::baggen
