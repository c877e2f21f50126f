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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/features/extractor.hpp"
#include "leukmil/features/feature_dump.hpp"
#include "leukmil/features/projection.hpp"
#include "support.hpp"

using namespace leukmil;
using namespace leukmil::features;

namespace {

CellCrop textured_crop(int size, std::uint64_t seed) {
  Rng rng(seed);
  CellCrop crop;
  crop.crop_id = "c" + std::to_string(seed);
  crop.pixels = Raster(size, size);
  for (auto& v : crop.pixels.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return crop;
}

}  // namespace

TEST_CASE("registry lists every backbone with its output width") {
  const std::map<std::string, int> want{{"toy_cnn", 192}, {"alexnet", 4096}, {"inception_v3", 2048},
                                        {"resnet50", 2048}, {"vgg16", 4096}, {"vit_b16", 768}};
  CHECK(backbone_registry().size() == want.size());
  for (const auto& [name, dim] : want) CHECK(backbone_spec(name).dim == dim);
  CHECK(backbone_spec("inception_v3").input_size == 299);
  CHECK_THROWS_AS(backbone_spec("resnet18"), ConfigError);
}

TEST_CASE("every backbone produces features of the registered width") {
  for (const auto& spec : backbone_registry()) {
    CAPTURE(spec.name);
    const auto fx = FeatureExtractor::create(spec.name, std::filesystem::path("/nonexistent"));
    CHECK_FALSE(fx.pretrained());
    const auto f = fx.extract_global(textured_crop(64, 1));
    CHECK(static_cast<int>(f.size()) == spec.dim);
    for (float v : f) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("extractor is frozen and deterministic") {
  const auto fx = FeatureExtractor::create("toy_cnn");
  const std::string before = fx.digest();
  std::vector<CellCrop> crops;
  for (int i = 0; i < 5; ++i) crops.push_back(textured_crop(64, 10 + i));
  const nn::RowMatrixF batch = fx.extract_batch(crops);
  CHECK(fx.digest() == before);
  CHECK(FeatureExtractor::create("toy_cnn").digest() == before);
  CHECK(FeatureExtractor::create("toy_cnn").digest() != FeatureExtractor::create("alexnet").digest());
  REQUIRE(batch.rows() == 5);
  for (int i = 0; i < 5; ++i) {
    const auto single = fx.extract_global(crops[i]);
    for (int j = 0; j < batch.cols(); ++j) CHECK(batch(i, j) == doctest::Approx(single[j]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(fx.extract_global(CellCrop::blank()), InvariantViolation);
}

TEST_CASE("weights archive is picked up from the weights directory") {
  leukmil::testing::TempDir dir("weights");
  auto bb = build_backbone("toy_cnn");
  TensorArchive ar;
  auto ps = bb->params();
  for (auto* p : ps)
    for (auto& v : p->value) v *= 0.5f;
  nn::store_params(std::vector<const nn::Param*>(ps.begin(), ps.end()), ar);
  ar.save(dir / "toy_cnn.lmarc");
  const auto loaded = FeatureExtractor::create("toy_cnn", dir.path());
  CHECK(loaded.pretrained());
  CHECK(loaded.digest() != FeatureExtractor::create("toy_cnn", dir / "missing").digest());
}

TEST_CASE("feature dump round trip") {
  leukmil::testing::TempDir dir("dump");
  FeatureDump d{"toy_cnn", "abc", {"a", "b"}, nn::RowMatrixF::Random(2, 7)};
  write_feature_dump(d, dir / "f");
  const FeatureDump back = read_feature_dump(dir / "f");
  CHECK(back.ids == d.ids);
  CHECK(back.backbone == "toy_cnn");
  CHECK(back.features == d.features);
}

TEST_CASE("projection head gradients match finite differences") {
  Rng rng(31);
  for (Activation act : {Activation::kRelu, Activation::kNone}) {
    ProjectionHead<double> head(6, act, rng);
    for (int point = 0; point < 3; ++point) {
      nn::Mat<double> x(4, 6);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
      nn::Mat<double> probe(4, ProjectionHead<double>::kOutputDim);
      for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.normal();
      auto loss = [&] { return (head.forward(x).array() * probe.array()).sum(); };
      typename ProjectionHead<double>::Cache cache;
      head.forward(x, cache);
      head.weight.zero_grad();
      head.bias.zero_grad();
      head.backward(cache, probe);
      for (int k = 0; k < 10; ++k) {
        auto& p = k % 2 ? head.weight : head.bias;
        const Eigen::Index i = rng.uniform_int(0, p.value.size() - 1);
        const double keep = p.value.data()[i], h = 1e-6;
        p.value.data()[i] = keep + h;
        const double up = loss();
        p.value.data()[i] = keep - h;
        const double down = loss();
        p.value.data()[i] = keep;
        const double num = (up - down) / (2 * h), ana = p.grad.data()[i];
        CHECK(std::abs(num - ana) <= 1e-3 * std::max(1.0, std::abs(num) + std::abs(ana)));
      }
    }
  }
  ProjectionHead<double> head(6, Activation::kRelu, rng);
  CHECK_THROWS_AS(head.forward(nn::Mat<double>::Zero(2, 5)), InvariantViolation);
}

// Runs only when the exporter and Python interpreter are provided.
TEST_CASE("backbones agree with the torchvision reference implementation") {
  const char* python = std::getenv("LEUKMIL_PYTHON");
  const char* exporter = std::getenv("LEUKMIL_EXPORTER");
  if (python == nullptr || exporter == nullptr) {
    MESSAGE("LEUKMIL_PYTHON / LEUKMIL_EXPORTER not set; skipped");
    return;
  }
  const std::string probe = std::string(python) + " -c 'import torch, torchvision' 2>/dev/null";
  if (std::system(probe.c_str()) != 0) {
    MESSAGE("torch/torchvision unavailable; skipped");
    return;
  }
  leukmil::testing::TempDir dir("tv");
  for (const auto& spec : backbone_registry()) {
    if (spec.name == "toy_cnn") continue;
    CAPTURE(spec.name);
    const std::string cmd = std::string(python) + " " + exporter + " --random --reference --backbone " + spec.name +
                            " --out-dir " + dir.path().string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream js(dir / (spec.name + ".ref.json"));
    const auto ref = nlohmann::json::parse(js);
    const int size = ref.at("size").get<int>();
    const auto want = ref.at("features").get<std::vector<double>>();
    Raster img(size, size);
    std::ifstream rgb(dir / (spec.name + ".ref.rgb"), std::ios::binary);
    rgb.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    REQUIRE(rgb.gcount() == static_cast<std::streamsize>(img.data.size()));

    const auto fx = FeatureExtractor::create(spec.name, dir.path());
    REQUIRE(fx.pretrained());
    const Raster* rs[] = {&img};
    const nn::RowMatrixF got = fx.extract_rasters(rs);
    REQUIRE(got.cols() == static_cast<int>(want.size()));
    double err = 0, norm = 0;
    for (std::size_t j = 0; j < want.size(); ++j) {
      err += (got(0, j) - want[j]) * (got(0, j) - want[j]);
      norm += want[j] * want[j];
    }
    CHECK(std::sqrt(err / norm) < 1e-3);
    std::filesystem::remove(dir / (spec.name + ".lmarc"));
  }
}
