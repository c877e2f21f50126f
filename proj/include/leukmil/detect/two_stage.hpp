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

#include <array>
#include <vector>

#include "json.hpp"
#include "leukmil/core/checkpoint.hpp"
#include "leukmil/detect/boxes.hpp"
#include "leukmil/detect/detector.hpp"
#include "leukmil/nn/layers.hpp"

namespace leukmil::detect {

struct TwoStageConfig {
  std::array<int, 4> backbone_channels{16, 32, 64, 64};  // three 2x pools -> stride 8
  std::vector<double> anchor_sizes{16.0, 24.0, 32.0};
  int rpn_channels = 64;
  int head_hidden = 256;
  int roi_size = 7;
  int roi_sampling = 2;

  double rpn_fg_iou = 0.5;
  double rpn_bg_iou = 0.3;
  int rpn_batch = 128;
  double rpn_nms_iou = 0.7;
  int pre_nms_train = 300;
  int post_nms_train = 48;
  int pre_nms_test = 300;
  int post_nms_test = 48;
  double roi_fg_iou = 0.5;
  int roi_batch = 48;
  double roi_fg_fraction = 0.5;
  int max_detections = 100;

  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev{0.229f, 0.224f, 0.225f};

  nlohmann::json to_json() const;
  static TwoStageConfig from_json(const nlohmann::json& j);

  static constexpr int kStride = 8;
};

// Region-proposal two-stage detector: a small convolutional backbone, an
// anchor-based proposal network and a RoIAlign box head with class-agnostic
// box refinement.
class TwoStageDetector final : public Detector {
 public:
  struct Losses {
    double rpn_objectness = 0;
    double rpn_box = 0;
    double head_class = 0;
    double head_box = 0;
    double total() const { return rpn_objectness + rpn_box + head_class + head_box; }
  };

  TwoStageDetector(ClassMap class_map, TwoStageConfig config, Rng& init_rng);

  std::string kind() const override { return "two_stage"; }
  ClassMap class_map() const override { return class_map_; }
  const TwoStageConfig& config() const { return config_; }
  DetectionResult run(const AnnotatedImage& image, double score_threshold, double nms_iou) const override;

  // One forward/backward pass on an image; accumulates gradients of the
  // summed loss into the parameters. `boxes` must be non-empty.
  Losses accumulate_gradients(const nn::Tensor& input, std::span<const BoundingBox> boxes, Rng& rng);

  nn::Tensor normalize(const Raster& raster) const;

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  std::vector<nn::Param*> backbone_params();
  void zero_grad();

  Checkpoint to_checkpoint() const;
  static TwoStageDetector from_checkpoint(const Checkpoint& checkpoint);

  // Proposals for an input, exposed for tests.
  std::vector<BoundingBox> propose(const nn::Tensor& input, bool training) const;

 private:
  std::vector<BoundingBox> anchors(int feat_h, int feat_w) const;
  nn::Tensor backbone_forward(const nn::Tensor& x) const;
  std::vector<BoundingBox> proposals_from(const nn::Tensor& objectness, const nn::Tensor& deltas,
                                          const std::vector<BoundingBox>& anchor_boxes, int image_w, int image_h,
                                          bool training) const;

  ClassMap class_map_;
  TwoStageConfig config_;
  std::array<nn::Conv2d, 4> backbone_;
  nn::Conv2d rpn_conv_;
  nn::Conv2d rpn_cls_;
  nn::Conv2d rpn_reg_;
  nn::Linear head_fc_;
  nn::Linear head_cls_;
  nn::Linear head_reg_;
};

inline constexpr Deltas kRpnDeltaWeights{1.0, 1.0, 1.0, 1.0};
inline constexpr Deltas kHeadDeltaWeights{10.0, 10.0, 5.0, 5.0};

}  // namespace leukmil::detect
