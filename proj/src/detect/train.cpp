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

#include "leukmil/detect/train.hpp"

#include <cmath>
#include <cstdlib>

#include "leukmil/core/error.hpp"
#include "leukmil/core/log.hpp"
#include "leukmil/detect/average_precision.hpp"
#include "leukmil/nn/adam.hpp"

namespace leukmil::detect {

nlohmann::json DetectorTrainConfig::to_json() const {
  return {{"class_map", std::string(to_string(class_map))},
          {"epochs", epochs},
          {"random_init_schedule", random_init_schedule},
          {"learning_rate", learning_rate},
          {"lr_drop_at", lr_drop_at},
          {"grad_clip_norm", grad_clip_norm},
          {"flip_augment", flip_augment},
          {"train_map_floor", train_map_floor},
          {"arch", arch.to_json()}};
}

DetectorTrainConfig DetectorTrainConfig::from_json(const nlohmann::json& j) {
  DetectorTrainConfig c;
  if (j.contains("class_map")) c.class_map = parse_class_map(j.at("class_map").get<std::string>());
  c.epochs = j.value("epochs", c.epochs);
  c.random_init_schedule = j.value("random_init_schedule", c.random_init_schedule);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_drop_at = j.value("lr_drop_at", c.lr_drop_at);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  c.flip_augment = j.value("flip_augment", c.flip_augment);
  c.train_map_floor = j.value("train_map_floor", c.train_map_floor);
  if (j.contains("arch")) c.arch = TwoStageConfig::from_json(j.at("arch"));
  return c;
}

nlohmann::json DetectorTrainSummary::to_json() const {
  return {{"images_used", images_used},   {"images_skipped", images_skipped},
          {"epochs_run", epochs_run},     {"pretrained_backbone", pretrained_backbone},
          {"final_loss", final_loss},     {"train_map", train_map}};
}

std::optional<std::filesystem::path> pretrained_backbone_path() {
  const char* dir = std::getenv(kWeightsDirEnv);
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  std::filesystem::path p = std::filesystem::path(dir) / "detector_backbone.lmarc";
  if (!std::filesystem::exists(p)) return std::nullopt;
  return p;
}

namespace {

void flip(AnnotatedImage& image, bool horizontal) {
  Raster& r = image.pixels;
  Raster out(r.width, r.height, 0);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const int sx = horizontal ? r.width - 1 - x : x;
      const int sy = horizontal ? y : r.height - 1 - y;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = r.at(sx, sy, c);
    }
  }
  for (auto& b : image.boxes) {
    if (horizontal) {
      const double x0 = r.width - b.x_max;
      b.x_max = r.width - b.x_min;
      b.x_min = x0;
    } else {
      const double y0 = r.height - b.y_max;
      b.y_max = r.height - b.y_min;
      b.y_min = y0;
    }
  }
  r = std::move(out);
}

}  // namespace

TrainedDetector train_detector(const DatasetManifest& manifest, const DetectorTrainConfig& config, Rng& rng) {
  if (config.epochs < 1) throw ConfigError("detector epochs must be >= 1");
  std::vector<AnnotatedImage> images;
  DetectorTrainSummary summary;
  for (const ManifestRecord* record : manifest.split(Split::kTrain)) {
    if (record->boxes.empty()) {
      ++summary.images_skipped;
      log::warn("detector_image_skipped", {{"image_id", record->image_id}, {"reason", "no boxes"}});
      continue;
    }
    images.push_back(manifest.load_image(*record));
  }
  if (images.empty()) throw InvariantViolation("detector training split has no annotated images");
  summary.images_used = static_cast<int>(images.size());

  Rng init_rng = rng.derive(1);
  Rng order_rng = rng.derive(2);
  Rng sample_rng = rng.derive(3);
  TwoStageDetector model(config.class_map, config.arch, init_rng);

  if (const auto path = pretrained_backbone_path()) {
    const TensorArchive archive = TensorArchive::load(*path);
    auto backbone = model.backbone_params();
    nn::load_params(backbone, archive);
    summary.pretrained_backbone = true;
  }
  summary.epochs_run = summary.pretrained_backbone
                           ? config.epochs
                           : static_cast<int>(std::ceil(config.epochs * config.random_init_schedule));

  nn::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  adam_config.grad_clip_norm = config.grad_clip_norm;
  nn::Adam<float> adam(adam_config);
  for (auto* p : model.params()) adam.add(std::span<float>(p->value), std::span<const float>(p->grad));

  const int drop_epoch = static_cast<int>(std::floor(summary.epochs_run * config.lr_drop_at));
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < summary.epochs_run; ++epoch) {
    if (epoch == drop_epoch) adam.set_learning_rate(config.learning_rate * 0.1);
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      AnnotatedImage sample = images[idx];
      if (config.flip_augment) {
        if (order_rng.bernoulli(0.5)) flip(sample, true);
        if (order_rng.bernoulli(0.5)) flip(sample, false);
      }
      model.zero_grad();
      const auto losses = model.accumulate_gradients(model.normalize(sample.pixels), sample.boxes, sample_rng);
      if (!std::isfinite(losses.total())) {
        throw NumericalError("detector loss diverged at epoch " + std::to_string(epoch));
      }
      adam.step();
      loss_sum += losses.total();
    }
    summary.final_loss = loss_sum / static_cast<double>(images.size());
    log::info("detector_epoch", {{"epoch", epoch + 1}, {"of", summary.epochs_run}, {"loss", summary.final_loss}});
  }

  std::vector<ImageDetections> scored;
  for (const auto& image : images) {
    scored.push_back({image.boxes, model.run(image, kMapScoreFloor, kDefaultNmsIou).boxes});
  }
  summary.train_map = compute_map(scored, config.class_map).map;
  log::info("detector_trained", summary.to_json());
  if (!(summary.train_map > config.train_map_floor)) {
    throw NumericalError("detector train-split mAP " + std::to_string(summary.train_map) +
                         " does not exceed the floor " + std::to_string(config.train_map_floor));
  }
  return {std::move(model), summary};
}

}  // namespace leukmil::detect
