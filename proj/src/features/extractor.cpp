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

#include "leukmil/features/extractor.hpp"

#include <cmath>
#include <cstdlib>

#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/log.hpp"
#include "leukmil/nn/layers.hpp"

namespace leukmil::features {

namespace {

constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};
constexpr std::array<float, 3> kImageNetStd{0.229f, 0.224f, 0.225f};
constexpr std::array<float, 3> kHalf{0.5f, 0.5f, 0.5f};

}  // namespace

const std::vector<BackboneSpec>& backbone_registry() {
  static const std::vector<BackboneSpec> registry{
      {"toy_cnn", 192, 64, kHalf, {0.25f, 0.25f, 0.25f}},
      {"alexnet", 4096, 224, kImageNetMean, kImageNetStd},
      {"inception_v3", 2048, 299, kHalf, kHalf},
      {"resnet50", 2048, 224, kImageNetMean, kImageNetStd},
      {"vgg16", 4096, 224, kImageNetMean, kImageNetStd},
      {"vit_b16", 768, 224, kImageNetMean, kImageNetStd},
  };
  return registry;
}

const BackboneSpec& backbone_spec(std::string_view name) {
  std::string names;
  for (const auto& spec : backbone_registry()) {
    if (spec.name == name) return spec;
    names += (names.empty() ? "" : ", ") + spec.name;
  }
  throw ConfigError("unknown backbone '" + std::string(name) + "' (choices: " + names + ")");
}

std::vector<const nn::Param*> Backbone::params() const {
  auto ps = const_cast<Backbone*>(this)->params();
  return {ps.begin(), ps.end()};
}

FeatureExtractor FeatureExtractor::create(std::string_view name, std::optional<std::filesystem::path> weights_dir) {
  const BackboneSpec& spec = backbone_spec(name);
  std::unique_ptr<Backbone> backbone = build_backbone(name);
  if (!weights_dir) {
    if (const char* env = std::getenv(kWeightsDirEnv); env != nullptr && *env != '\0') weights_dir = env;
  }
  bool pretrained = false;
  if (weights_dir) {
    const auto path = *weights_dir / (spec.name + ".lmarc");
    if (std::filesystem::exists(path)) {
      auto ps = backbone->params();
      nn::load_params(ps, TensorArchive::load(path));
      pretrained = true;
    }
  }
  if (!pretrained && spec.name != "toy_cnn") {
    log::warn("backbone_random_init", {{"backbone", spec.name}});
  }
  return FeatureExtractor(spec, std::move(backbone), pretrained);
}

std::string FeatureExtractor::digest() const {
  Sha256 sha;
  sha.update(spec_.name);
  const auto ps = backbone_->params();
  sha.update(nn::params_digest(ps));
  return sha.finish();
}

nn::Tensor FeatureExtractor::prepare(std::span<const Raster* const> rasters) const {
  const int s = spec_.input_size;
  nn::Tensor batch(static_cast<int>(rasters.size()), 3, s, s);
  for (std::size_t i = 0; i < rasters.size(); ++i) {
    const Raster& r = *rasters[i];
    const nn::Tensor t = (r.width == s && r.height == s)
                             ? nn::raster_to_tensor(r, spec_.mean, spec_.stddev)
                             : nn::raster_to_tensor(resize_bilinear(r, s, s), spec_.mean, spec_.stddev);
    std::copy(t.data.begin(), t.data.end(), batch.image(static_cast<int>(i)));
  }
  return batch;
}

nn::RowMatrixF FeatureExtractor::extract_rasters(std::span<const Raster* const> rasters) const {
  nn::RowMatrixF out(static_cast<Eigen::Index>(rasters.size()), spec_.dim);
  const std::size_t step = static_cast<std::size_t>(std::max(1, backbone_->batch_size()));
  for (std::size_t start = 0; start < rasters.size(); start += step) {
    const std::size_t n = std::min(step, rasters.size() - start);
    const nn::RowMatrixF f = backbone_->forward(prepare(rasters.subspan(start, n)));
    if (!f.allFinite()) throw NumericalError("backbone '" + spec_.name + "' produced non-finite features");
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = f;
  }
  return out;
}

nn::RowMatrixF FeatureExtractor::extract_batch(std::span<const CellCrop> crops) const {
  std::vector<const Raster*> rasters;
  rasters.reserve(crops.size());
  for (const auto& crop : crops) {
    if (crop.is_blank) throw InvariantViolation("blank crops carry no features; '" + crop.crop_id + "'");
    rasters.push_back(&crop.pixels);
  }
  return extract_rasters(rasters);
}

std::vector<float> FeatureExtractor::extract_global(const CellCrop& crop) const {
  const nn::RowMatrixF f = extract_batch(std::span<const CellCrop>(&crop, 1));
  return {f.data(), f.data() + f.size()};
}

}  // namespace leukmil::features
