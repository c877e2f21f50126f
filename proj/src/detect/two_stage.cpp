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

#include "leukmil/detect/two_stage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leukmil/core/error.hpp"

namespace leukmil::detect {

using nn::Conv2d;
using nn::ConvSpec;
using nn::Linear;
using nn::RowMatrixF;
using nn::Tensor;

nlohmann::json TwoStageConfig::to_json() const {
  return {{"backbone_channels", backbone_channels},
          {"anchor_sizes", anchor_sizes},
          {"rpn_channels", rpn_channels},
          {"head_hidden", head_hidden},
          {"roi_size", roi_size},
          {"roi_sampling", roi_sampling},
          {"rpn_fg_iou", rpn_fg_iou},
          {"rpn_bg_iou", rpn_bg_iou},
          {"rpn_batch", rpn_batch},
          {"rpn_nms_iou", rpn_nms_iou},
          {"pre_nms_train", pre_nms_train},
          {"post_nms_train", post_nms_train},
          {"pre_nms_test", pre_nms_test},
          {"post_nms_test", post_nms_test},
          {"roi_fg_iou", roi_fg_iou},
          {"roi_batch", roi_batch},
          {"roi_fg_fraction", roi_fg_fraction},
          {"max_detections", max_detections},
          {"mean", mean},
          {"stddev", stddev}};
}

TwoStageConfig TwoStageConfig::from_json(const nlohmann::json& j) {
  TwoStageConfig c;
  c.backbone_channels = j.value("backbone_channels", c.backbone_channels);
  c.anchor_sizes = j.value("anchor_sizes", c.anchor_sizes);
  c.rpn_channels = j.value("rpn_channels", c.rpn_channels);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.roi_size = j.value("roi_size", c.roi_size);
  c.roi_sampling = j.value("roi_sampling", c.roi_sampling);
  c.rpn_fg_iou = j.value("rpn_fg_iou", c.rpn_fg_iou);
  c.rpn_bg_iou = j.value("rpn_bg_iou", c.rpn_bg_iou);
  c.rpn_batch = j.value("rpn_batch", c.rpn_batch);
  c.rpn_nms_iou = j.value("rpn_nms_iou", c.rpn_nms_iou);
  c.pre_nms_train = j.value("pre_nms_train", c.pre_nms_train);
  c.post_nms_train = j.value("post_nms_train", c.post_nms_train);
  c.pre_nms_test = j.value("pre_nms_test", c.pre_nms_test);
  c.post_nms_test = j.value("post_nms_test", c.post_nms_test);
  c.roi_fg_iou = j.value("roi_fg_iou", c.roi_fg_iou);
  c.roi_batch = j.value("roi_batch", c.roi_batch);
  c.roi_fg_fraction = j.value("roi_fg_fraction", c.roi_fg_fraction);
  c.max_detections = j.value("max_detections", c.max_detections);
  c.mean = j.value("mean", c.mean);
  c.stddev = j.value("stddev", c.stddev);
  return c;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Smooth L1 value and derivative.
std::pair<double, double> smooth_l1(double diff, double beta) {
  const double a = std::abs(diff);
  if (a < beta) return {0.5 * diff * diff / beta, diff / beta};
  return {a - 0.5 * beta, diff > 0 ? 1.0 : -1.0};
}

constexpr double kRpnBeta = 1.0 / 9.0;
constexpr double kHeadBeta = 1.0;
constexpr double kMinProposalSide = 2.0;

}  // namespace

TwoStageDetector::TwoStageDetector(ClassMap class_map, TwoStageConfig config, Rng& init_rng)
    : class_map_(class_map), config_(std::move(config)) {
  int in = 3;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    backbone_[i] = Conv2d("backbone.conv" + std::to_string(i),
                          ConvSpec{in, config_.backbone_channels[i], 3, 3, 1, 1, 1, 1, true});
    backbone_[i].init_he(init_rng);
    in = config_.backbone_channels[i];
  }
  const int anchors_per_cell = static_cast<int>(config_.anchor_sizes.size());
  rpn_conv_ = Conv2d("rpn.conv", ConvSpec{in, config_.rpn_channels, 3, 3, 1, 1, 1, 1, true});
  rpn_conv_.init_he(init_rng);
  rpn_cls_ = Conv2d("rpn.cls", ConvSpec{config_.rpn_channels, anchors_per_cell, 1, 1, 1, 1, 0, 0, true});
  rpn_cls_.weight.init_normal(init_rng, 0.01);
  rpn_reg_ = Conv2d("rpn.reg", ConvSpec{config_.rpn_channels, 4 * anchors_per_cell, 1, 1, 1, 1, 0, 0, true});
  rpn_reg_.weight.init_normal(init_rng, 0.01);
  head_fc_ = Linear("head.fc", in * config_.roi_size * config_.roi_size, config_.head_hidden);
  head_fc_.init_he(init_rng);
  head_cls_ = Linear("head.cls", config_.head_hidden, foreground_classes(class_map_) + 1);
  head_cls_.init_normal(init_rng, 0.01);
  head_reg_ = Linear("head.reg", config_.head_hidden, 4);
  head_reg_.init_normal(init_rng, 0.001);
}

std::vector<nn::Param*> TwoStageDetector::backbone_params() {
  std::vector<nn::Param*> out;
  for (auto& conv : backbone_) {
    for (auto* p : conv.params()) out.push_back(p);
  }
  return out;
}

std::vector<nn::Param*> TwoStageDetector::params() {
  std::vector<nn::Param*> out = backbone_params();
  for (auto* layer : {&rpn_conv_, &rpn_cls_, &rpn_reg_}) {
    for (auto* p : layer->params()) out.push_back(p);
  }
  for (auto* layer : {&head_fc_, &head_cls_, &head_reg_}) {
    for (auto* p : layer->params()) out.push_back(p);
  }
  return out;
}

std::vector<const nn::Param*> TwoStageDetector::params() const {
  auto mutable_params = const_cast<TwoStageDetector*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

void TwoStageDetector::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

Tensor TwoStageDetector::normalize(const Raster& raster) const {
  return nn::raster_to_tensor(raster, config_.mean, config_.stddev);
}

std::vector<BoundingBox> TwoStageDetector::anchors(int feat_h, int feat_w) const {
  std::vector<BoundingBox> out;
  out.reserve(static_cast<std::size_t>(feat_h) * feat_w * config_.anchor_sizes.size());
  for (int y = 0; y < feat_h; ++y) {
    for (int x = 0; x < feat_w; ++x) {
      const double cx = (x + 0.5) * TwoStageConfig::kStride;
      const double cy = (y + 0.5) * TwoStageConfig::kStride;
      for (double size : config_.anchor_sizes) {
        BoundingBox a;
        a.x_min = cx - size / 2;
        a.y_min = cy - size / 2;
        a.x_max = cx + size / 2;
        a.y_max = cy + size / 2;
        out.push_back(a);
      }
    }
  }
  return out;
}

Tensor TwoStageDetector::backbone_forward(const Tensor& x) const {
  Tensor cur = x;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    cur = backbone_[i].forward(cur);
    nn::relu_inplace(cur);
    if (i + 1 < backbone_.size()) cur = nn::max_pool(cur, nn::PoolSpec{2, 2, 0, false});
  }
  return cur;
}

std::vector<BoundingBox> TwoStageDetector::proposals_from(const Tensor& objectness, const Tensor& deltas,
                                                          const std::vector<BoundingBox>& anchor_boxes, int image_w,
                                                          int image_h, bool training) const {
  const int a_per = static_cast<int>(config_.anchor_sizes.size());
  const int fw = objectness.w;
  std::vector<std::pair<float, std::size_t>> ranked;
  ranked.reserve(anchor_boxes.size());
  for (std::size_t i = 0; i < anchor_boxes.size(); ++i) {
    const int a = static_cast<int>(i % a_per);
    const int cell = static_cast<int>(i / a_per);
    ranked.emplace_back(objectness.at(0, a, cell / fw, cell % fw), i);
  }
  const std::size_t pre = std::min<std::size_t>(ranked.size(), training ? config_.pre_nms_train : config_.pre_nms_test);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(pre), ranked.end(),
                    [](const auto& l, const auto& r) { return l.first > r.first || (l.first == r.first && l.second < r.second); });
  std::vector<BoundingBox> boxes;
  for (std::size_t k = 0; k < pre; ++k) {
    const std::size_t i = ranked[k].second;
    const int a = static_cast<int>(i % a_per);
    const int cell = static_cast<int>(i / a_per);
    const int y = cell / fw, x = cell % fw;
    Deltas d;
    for (int j = 0; j < 4; ++j) d[j] = deltas.at(0, 4 * a + j, y, x);
    BoundingBox box = clip_box(decode_box(anchor_boxes[i], d, kRpnDeltaWeights), image_w, image_h);
    box.score = sigmoid(ranked[k].first);
    if (box.width() < kMinProposalSide || box.height() < kMinProposalSide) continue;
    boxes.push_back(box);
  }
  std::vector<BoundingBox> kept = apply_nms(boxes, config_.rpn_nms_iou);
  const std::size_t post = training ? config_.post_nms_train : config_.post_nms_test;
  if (kept.size() > post) kept.resize(post);
  return kept;
}

std::vector<BoundingBox> TwoStageDetector::propose(const Tensor& input, bool training) const {
  const Tensor features = backbone_forward(input);
  Tensor r = rpn_conv_.forward(features);
  nn::relu_inplace(r);
  return proposals_from(rpn_cls_.forward(r), rpn_reg_.forward(r), anchors(features.h, features.w), input.w, input.h,
                        training);
}

DetectionResult TwoStageDetector::run(const AnnotatedImage& image, double score_threshold, double nms_iou) const {
  DetectionResult result;
  result.image_id = image.image_id;
  const Tensor input = normalize(image.pixels);
  const Tensor features = backbone_forward(input);
  Tensor r = rpn_conv_.forward(features);
  nn::relu_inplace(r);
  const std::vector<BoundingBox> rois = proposals_from(rpn_cls_.forward(r), rpn_reg_.forward(r),
                                                       anchors(features.h, features.w), input.w, input.h, false);
  if (rois.empty()) return result;

  const Tensor pooled = nn::roi_align(features, rois, config_.roi_size, 1.0 / TwoStageConfig::kStride,
                                      config_.roi_sampling);
  RowMatrixF flat = nn::ConstMapRowF(pooled.data.data(), pooled.n, static_cast<Eigen::Index>(pooled.image_size()));
  RowMatrixF hidden = head_fc_.forward(flat);
  hidden = hidden.cwiseMax(0.0f);
  const RowMatrixF logits = head_cls_.forward(hidden);
  const RowMatrixF reg = head_reg_.forward(hidden);

  const int n_fg = foreground_classes(class_map_);
  std::vector<std::vector<BoundingBox>> per_class(n_fg);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double denom = 0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) denom += std::exp(logits(i, k) - mx);
    const Deltas d{reg(i, 0), reg(i, 1), reg(i, 2), reg(i, 3)};
    BoundingBox refined = clip_box(decode_box(rois[i], d, kHeadDeltaWeights), image.pixels.width, image.pixels.height);
    if (refined.width() < 1.0 || refined.height() < 1.0) continue;
    for (int k = 1; k <= n_fg; ++k) {
      const double p = std::clamp(std::exp(logits(i, k) - mx) / denom, 0.0, 1.0);
      if (!(p > score_threshold)) continue;
      BoundingBox box = refined;
      box.score = p;
      box.cell_class = class_of(class_map_, k);
      per_class[k - 1].push_back(box);
    }
  }
  std::vector<BoundingBox> merged;
  for (const auto& boxes : per_class) {
    for (const auto& b : apply_nms(boxes, nms_iou)) merged.push_back(b);
  }
  result.boxes = apply_nms(merged, nms_iou);
  if (result.boxes.size() > static_cast<std::size_t>(config_.max_detections)) {
    result.boxes.resize(config_.max_detections);
  }
  return result;
}

TwoStageDetector::Losses TwoStageDetector::accumulate_gradients(const Tensor& input,
                                                                std::span<const BoundingBox> gt, Rng& rng) {
  if (gt.empty()) throw InvariantViolation("detector training image has no boxes");
  Losses losses;

  // Backbone with caches.
  std::array<Conv2d::Cache, 4> conv_cache;
  std::array<Tensor, 4> act;
  std::array<std::vector<int>, 3> argmax;
  Tensor cur = input;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    act[i] = backbone_[i].forward_train(cur, conv_cache[i]);
    nn::relu_inplace(act[i]);
    cur = i + 1 < backbone_.size() ? nn::max_pool(act[i], nn::PoolSpec{2, 2, 0, false}, &argmax[i]) : act[i];
  }
  const Tensor& features = act.back();

  Conv2d::Cache rpn_cache, cls_cache, reg_cache;
  Tensor r = rpn_conv_.forward_train(features, rpn_cache);
  nn::relu_inplace(r);
  const Tensor objectness = rpn_cls_.forward_train(r, cls_cache);
  const Tensor deltas = rpn_reg_.forward_train(r, reg_cache);
  const std::vector<BoundingBox> anchor_boxes = anchors(features.h, features.w);

  // Anchor labelling: 1 fg, 0 bg, -1 ignored.
  const int a_per = static_cast<int>(config_.anchor_sizes.size());
  const int fw = features.w;
  std::vector<int> label(anchor_boxes.size(), -1);
  std::vector<int> matched(anchor_boxes.size(), -1);
  std::vector<double> best_for_gt(gt.size(), 0.0);
  std::vector<double> best_iou(anchor_boxes.size(), 0.0);
  for (std::size_t i = 0; i < anchor_boxes.size(); ++i) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double o = iou(anchor_boxes[i], gt[g]);
      if (o > best_iou[i]) {
        best_iou[i] = o;
        matched[i] = static_cast<int>(g);
      }
      best_for_gt[g] = std::max(best_for_gt[g], o);
    }
    if (best_iou[i] < config_.rpn_bg_iou) label[i] = 0;
    if (best_iou[i] >= config_.rpn_fg_iou) label[i] = 1;
  }
  for (std::size_t i = 0; i < anchor_boxes.size(); ++i) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (best_for_gt[g] > 0 && iou(anchor_boxes[i], gt[g]) == best_for_gt[g]) {
        label[i] = 1;
        matched[i] = static_cast<int>(g);
      }
    }
  }
  std::vector<std::size_t> fg, bg;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == 1) fg.push_back(i);
    if (label[i] == 0) bg.push_back(i);
  }
  rng.shuffle(std::span<std::size_t>(fg));
  rng.shuffle(std::span<std::size_t>(bg));
  fg.resize(std::min<std::size_t>(fg.size(), config_.rpn_batch / 2));
  bg.resize(std::min<std::size_t>(bg.size(), config_.rpn_batch - fg.size()));
  const double n_sampled = static_cast<double>(fg.size() + bg.size());

  Tensor d_obj(1, objectness.c, objectness.h, objectness.w);
  Tensor d_del(1, deltas.c, deltas.h, deltas.w);
  auto visit_anchor = [&](std::size_t i, bool positive) {
    const int a = static_cast<int>(i % a_per);
    const int cell = static_cast<int>(i / a_per);
    const int y = cell / fw, x = cell % fw;
    const double logit = objectness.at(0, a, y, x);
    const double p = sigmoid(logit);
    const double t = positive ? 1.0 : 0.0;
    // Numerically stable BCE with logits.
    losses.rpn_objectness += (std::max(logit, 0.0) - logit * t + std::log1p(std::exp(-std::abs(logit)))) / n_sampled;
    d_obj.at(0, a, y, x) = static_cast<float>((p - t) / n_sampled);
    if (!positive) return;
    const Deltas target = encode_box(anchor_boxes[i], gt[matched[i]], kRpnDeltaWeights);
    for (int j = 0; j < 4; ++j) {
      const auto [v, g] = smooth_l1(deltas.at(0, 4 * a + j, y, x) - target[j], kRpnBeta);
      losses.rpn_box += v / n_sampled;
      d_del.at(0, 4 * a + j, y, x) = static_cast<float>(g / n_sampled);
    }
  };
  for (std::size_t i : fg) visit_anchor(i, true);
  for (std::size_t i : bg) visit_anchor(i, false);

  // Second stage on sampled proposals plus the ground truth itself.
  std::vector<BoundingBox> proposals =
      proposals_from(objectness, deltas, anchor_boxes, input.w, input.h, /*training=*/true);
  for (const auto& g : gt) proposals.push_back(g);
  std::vector<std::size_t> roi_fg, roi_bg;
  std::vector<int> roi_match(proposals.size(), -1);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = 0.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double o = iou(proposals[i], gt[g]);
      if (o > best) {
        best = o;
        roi_match[i] = static_cast<int>(g);
      }
    }
    (best >= config_.roi_fg_iou ? roi_fg : roi_bg).push_back(i);
  }
  rng.shuffle(std::span<std::size_t>(roi_fg));
  rng.shuffle(std::span<std::size_t>(roi_bg));
  roi_fg.resize(std::min<std::size_t>(roi_fg.size(),
                                      static_cast<std::size_t>(config_.roi_batch * config_.roi_fg_fraction)));
  roi_bg.resize(std::min<std::size_t>(roi_bg.size(), config_.roi_batch - roi_fg.size()));
  std::vector<BoundingBox> rois;
  std::vector<int> roi_label;
  std::vector<int> roi_gt;
  for (std::size_t i : roi_fg) {
    rois.push_back(proposals[i]);
    roi_label.push_back(index_of(class_map_, gt[roi_match[i]]));
    roi_gt.push_back(roi_match[i]);
  }
  for (std::size_t i : roi_bg) {
    rois.push_back(proposals[i]);
    roi_label.push_back(0);
    roi_gt.push_back(-1);
  }

  const double scale = 1.0 / TwoStageConfig::kStride;
  const Tensor pooled = nn::roi_align(features, rois, config_.roi_size, scale, config_.roi_sampling);
  const RowMatrixF flat =
      nn::ConstMapRowF(pooled.data.data(), pooled.n, static_cast<Eigen::Index>(pooled.image_size()));
  RowMatrixF hidden = head_fc_.forward(flat);
  hidden = hidden.cwiseMax(0.0f);
  const RowMatrixF logits = head_cls_.forward(hidden);
  const RowMatrixF reg = head_reg_.forward(hidden);

  const auto n_rois = static_cast<double>(rois.size());
  RowMatrixF d_logits = RowMatrixF::Zero(logits.rows(), logits.cols());
  RowMatrixF d_reg = RowMatrixF::Zero(reg.rows(), reg.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double denom = 0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) denom += std::exp(logits(i, k) - mx);
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double p = std::exp(logits(i, k) - mx) / denom;
      d_logits(i, k) = static_cast<float>((p - (k == roi_label[i] ? 1.0 : 0.0)) / n_rois);
    }
    losses.head_class += -(logits(i, roi_label[i]) - mx - std::log(denom)) / n_rois;
    if (roi_label[i] == 0) continue;
    const Deltas target = encode_box(rois[i], gt[roi_gt[i]], kHeadDeltaWeights);
    for (int j = 0; j < 4; ++j) {
      const auto [v, g] = smooth_l1(reg(i, j) - target[j], kHeadBeta);
      losses.head_box += v / n_rois;
      d_reg(i, j) = static_cast<float>(g / n_rois);
    }
  }

  RowMatrixF d_hidden = head_cls_.backward(hidden, d_logits) + head_reg_.backward(hidden, d_reg);
  d_hidden = (hidden.array() > 0.0f).select(d_hidden, 0.0f);
  const RowMatrixF d_flat = head_fc_.backward(flat, d_hidden);
  Tensor d_pooled(pooled.n, pooled.c, pooled.h, pooled.w);
  std::copy(d_flat.data(), d_flat.data() + d_flat.size(), d_pooled.data.begin());
  Tensor d_features(1, features.c, features.h, features.w);
  nn::roi_align_backward(d_pooled, rois, config_.roi_size, scale, config_.roi_sampling, d_features);

  Tensor d_r = rpn_cls_.backward(d_obj, cls_cache);
  const Tensor d_r_reg = rpn_reg_.backward(d_del, reg_cache);
  for (std::size_t i = 0; i < d_r.data.size(); ++i) d_r.data[i] += d_r_reg.data[i];
  nn::relu_backward_inplace(d_r, r);
  const Tensor d_feat_rpn = rpn_conv_.backward(d_r, rpn_cache);
  for (std::size_t i = 0; i < d_features.data.size(); ++i) d_features.data[i] += d_feat_rpn.data[i];

  Tensor grad = std::move(d_features);
  for (int i = static_cast<int>(backbone_.size()) - 1; i >= 0; --i) {
    nn::relu_backward_inplace(grad, act[i]);
    grad = backbone_[i].backward(grad, conv_cache[i], /*need_input_grad=*/i > 0);
    if (i > 0) grad = nn::max_pool_backward(grad, argmax[i - 1], act[i - 1].h, act[i - 1].w);
  }
  return losses;
}

Checkpoint TwoStageDetector::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = "detector";
  ckpt.config = {{"class_map", std::string(to_string(class_map_))}, {"arch", config_.to_json()}};
  const auto ps = params();
  nn::store_params(ps, ckpt.parameters);
  return ckpt;
}

TwoStageDetector TwoStageDetector::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "detector") throw FormatError("checkpoint kind '" + ckpt.kind + "' is not a detector");
  Rng rng(0);
  TwoStageDetector det(parse_class_map(ckpt.config.at("class_map").get<std::string>()),
                       TwoStageConfig::from_json(ckpt.config.at("arch")), rng);
  auto ps = det.params();
  nn::load_params(ps, ckpt.parameters);
  return det;
}

}  // namespace leukmil::detect
