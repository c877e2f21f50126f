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

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "leukmil/core/archive.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/features/projection.hpp"
#include "leukmil/nn/dense.hpp"

namespace leukmil::model {

inline constexpr int kHiddenDim = 256;
inline constexpr int kPatientDim = 64;
inline constexpr int kNumClasses = 2;
// Logit order: index 0 is HEALTHY, index 1 is ALL.
inline constexpr int kAllIndex = 1;

struct ModelConfig {
  int feature_dim = 0;  // d_g of the frozen extractor
  features::Activation activation = features::Activation::kRelu;
  // Blank steps leave the recurrent state untouched instead of feeding the
  // projected zero vector. Off by default; used by ablations.
  bool mask_skip = false;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// A batch of B sequences of equal length L in time-major order: row t*B + b of
// `features` is step t of sequence b. Blank entries are zero rows with
// `present[t*B + b] == false`.
template <typename S>
struct SequenceBatch {
  int batch = 0;
  int length = 0;
  nn::Mat<S> features;
  std::vector<bool> present;
};

template <typename S>
struct Prediction {
  nn::Mat<S> patient;  // B x 64
  nn::Mat<S> logits;   // B x 2
  nn::Mat<S> probs;    // B x 2, rows sum to 1
};

// Projection head -> LSTM(256) over the sequence -> affine map of the final
// hidden state to the 64-d patient vector -> affine 64 -> 2 classifier.
template <typename S>
class AggregatorClassifier {
 public:
  using Mat = nn::Mat<S>;

  AggregatorClassifier() = default;
  AggregatorClassifier(const ModelConfig& config, Rng& rng)
      : config_(config),
        projection_(config.feature_dim, config.activation, rng),
        w_ih_("lstm.weight_ih", 4 * kHiddenDim, features::ProjectionHead<S>::kOutputDim),
        w_hh_("lstm.weight_hh", 4 * kHiddenDim, kHiddenDim),
        b_("lstm.bias", 1, 4 * kHiddenDim),
        w_pv_("patient.weight", kPatientDim, kHiddenDim),
        b_pv_("patient.bias", 1, kPatientDim),
        w_cls_("classifier.weight", kNumClasses, kPatientDim),
        b_cls_("classifier.bias", 1, kNumClasses) {
    const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(kHiddenDim));
    w_ih_.init_uniform(rng, lstm_bound);
    w_hh_.init_uniform(rng, lstm_bound);
    b_.init_uniform(rng, lstm_bound);
    b_.value.middleCols(kHiddenDim, kHiddenDim).array() += S(1);  // forget-gate bias
    w_pv_.init_uniform(rng, lstm_bound);
    b_pv_.init_uniform(rng, lstm_bound);
    const double cls_bound = 1.0 / std::sqrt(static_cast<double>(kPatientDim));
    w_cls_.init_uniform(rng, cls_bound);
    b_cls_.init_uniform(rng, cls_bound);
  }

  const ModelConfig& config() const { return config_; }
  features::ProjectionHead<S>& projection() { return projection_; }
  const features::ProjectionHead<S>& projection() const { return projection_; }

  Prediction<S> forward(const SequenceBatch<S>& batch) const {
    Cache cache;
    return run(batch, cache, false);
  }

  // Mean softmax cross-entropy over the batch; accumulates every gradient.
  // labels[b] is 1 for ALL and 0 for HEALTHY.
  S loss_and_gradients(const SequenceBatch<S>& batch, const std::vector<int>& labels) {
    Cache cache;
    const Prediction<S> out = run(batch, cache, true);
    const int B = batch.batch;
    const int H = kHiddenDim;
    S loss = 0;
    Mat d_logits = out.probs;
    for (int b = 0; b < B; ++b) {
      loss -= std::log(std::max(out.probs(b, labels[b]), S(1e-30)));
      d_logits(b, labels[b]) -= S(1);
    }
    loss /= B;
    d_logits /= static_cast<S>(B);

    w_cls_.grad.noalias() += d_logits.transpose() * out.patient;
    b_cls_.grad.row(0) += d_logits.colwise().sum();
    const Mat d_patient = d_logits * w_cls_.value;
    const Mat& h_last = cache.h.back();
    w_pv_.grad.noalias() += d_patient.transpose() * h_last;
    b_pv_.grad.row(0) += d_patient.colwise().sum();

    Mat d_h = d_patient * w_pv_.value;
    Mat d_c = Mat::Zero(B, H);
    Mat d_proj = Mat::Zero(static_cast<Eigen::Index>(B) * batch.length, features::ProjectionHead<S>::kOutputDim);
    for (int t = batch.length - 1; t >= 0; --t) {
      const Step& st = cache.steps[t];
      const Mat& h_prev = cache.h[t];
      const Mat& c_prev = cache.c[t];
      const auto i = st.gates.leftCols(H).array();
      const auto f = st.gates.middleCols(H, H).array();
      const auto g = st.gates.middleCols(2 * H, H).array();
      const auto o = st.gates.rightCols(H).array();
      const auto tc = st.tanh_c.array();

      Mat d_h_in = d_h, d_c_in = d_c;
      if (config_.mask_skip) {
        for (int b = 0; b < B; ++b) {
          if (!batch.present[static_cast<std::size_t>(t) * B + b]) {
            d_h_in.row(b).setZero();
            d_c_in.row(b).setZero();
          }
        }
      }
      const Mat d_c_total = (d_c_in.array() + d_h_in.array() * o * (S(1) - tc * tc)).matrix();
      Mat d_gates(B, 4 * H);
      d_gates.leftCols(H) = (d_c_total.array() * g * i * (S(1) - i)).matrix();
      d_gates.middleCols(H, H) = (d_c_total.array() * c_prev.array() * f * (S(1) - f)).matrix();
      d_gates.middleCols(2 * H, H) = (d_c_total.array() * i * (S(1) - g * g)).matrix();
      d_gates.rightCols(H) = (d_h_in.array() * tc * o * (S(1) - o)).matrix();

      const auto p_t = cache.projected.middleRows(static_cast<Eigen::Index>(t) * B, B);
      w_ih_.grad.noalias() += d_gates.transpose() * p_t;
      w_hh_.grad.noalias() += d_gates.transpose() * h_prev;
      b_.grad.row(0) += d_gates.colwise().sum();
      d_proj.middleRows(static_cast<Eigen::Index>(t) * B, B).noalias() = d_gates * w_ih_.value;

      Mat d_h_prev = d_gates * w_hh_.value;
      Mat d_c_prev = (d_c_total.array() * f).matrix();
      if (config_.mask_skip) {
        for (int b = 0; b < B; ++b) {
          if (!batch.present[static_cast<std::size_t>(t) * B + b]) {
            d_h_prev.row(b) = d_h.row(b);
            d_c_prev.row(b) = d_c.row(b);
          }
        }
      }
      d_h = std::move(d_h_prev);
      d_c = std::move(d_c_prev);
    }
    projection_.backward(cache.projection, d_proj);
    return loss;
  }

  std::vector<nn::DenseParam<S>*> params() {
    auto ps = projection_.params();
    for (auto* p : {&w_ih_, &w_hh_, &b_, &w_pv_, &b_pv_, &w_cls_, &b_cls_}) ps.push_back(p);
    return ps;
  }
  std::vector<const nn::DenseParam<S>*> params() const {
    auto mutable_params = const_cast<AggregatorClassifier*>(this)->params();
    return {mutable_params.begin(), mutable_params.end()};
  }
  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  // Parameter groups, for gradient checks.
  std::vector<nn::DenseParam<S>*> recurrent_params() { return {&w_ih_, &w_hh_, &b_}; }
  std::vector<nn::DenseParam<S>*> patient_params() { return {&w_pv_, &b_pv_}; }
  std::vector<nn::DenseParam<S>*> classifier_params() { return {&w_cls_, &b_cls_}; }

  void store(TensorArchive& archive) const { nn::store_dense(params(), archive); }
  void load(const TensorArchive& archive) { nn::load_dense(params(), archive); }

 private:
  struct Step {
    Mat gates;   // activated i, f, g, o
    Mat tanh_c;  // tanh of the candidate cell state
  };
  struct Cache {
    typename features::ProjectionHead<S>::Cache projection;
    Mat projected;
    std::vector<Mat> h;  // h[t] is the state entering step t; h[L] is final
    std::vector<Mat> c;
    std::vector<Step> steps;
  };

  static S sigmoid(S x) { return S(1) / (S(1) + std::exp(-x)); }

  Prediction<S> run(const SequenceBatch<S>& batch, Cache& cache, bool training) const {
    const int B = batch.batch, L = batch.length, H = kHiddenDim;
    if (B < 1 || L < 1) throw InvariantViolation("sequence batch must be non-empty");
    if (batch.features.rows() != static_cast<Eigen::Index>(B) * L ||
        batch.present.size() != static_cast<std::size_t>(B) * L) {
      throw InvariantViolation("sequence batch shape mismatch");
    }
    cache.projected = training ? projection_.forward(batch.features, cache.projection)
                               : projection_.forward(batch.features);
    cache.h.assign(1, Mat::Zero(B, H));
    cache.c.assign(1, Mat::Zero(B, H));
    cache.steps.clear();
    for (int t = 0; t < L; ++t) {
      const auto p_t = cache.projected.middleRows(static_cast<Eigen::Index>(t) * B, B);
      Mat z = p_t * w_ih_.value.transpose();
      z.noalias() += cache.h.back() * w_hh_.value.transpose();
      z.rowwise() += b_.value.row(0);
      Step st;
      st.gates.resize(B, 4 * H);
      st.gates.leftCols(2 * H) = z.leftCols(2 * H).unaryExpr([](S v) { return sigmoid(v); });
      st.gates.middleCols(2 * H, H) = z.middleCols(2 * H, H).array().tanh().matrix();
      st.gates.rightCols(H) = z.rightCols(H).unaryExpr([](S v) { return sigmoid(v); });
      Mat c_new = (st.gates.middleCols(H, H).array() * cache.c.back().array() +
                   st.gates.leftCols(H).array() * st.gates.middleCols(2 * H, H).array())
                      .matrix();
      st.tanh_c = c_new.array().tanh().matrix();
      Mat h_new = (st.gates.rightCols(H).array() * st.tanh_c.array()).matrix();
      if (config_.mask_skip) {
        for (int b = 0; b < B; ++b) {
          if (!batch.present[static_cast<std::size_t>(t) * B + b]) {
            h_new.row(b) = cache.h.back().row(b);
            c_new.row(b) = cache.c.back().row(b);
          }
        }
      }
      if (!h_new.allFinite()) {
        throw NumericalError("non-finite recurrent activation at step " + std::to_string(t));
      }
      cache.h.push_back(std::move(h_new));
      cache.c.push_back(std::move(c_new));
      cache.steps.push_back(std::move(st));
    }
    Prediction<S> out;
    out.patient = cache.h.back() * w_pv_.value.transpose();
    out.patient.rowwise() += b_pv_.value.row(0);
    out.logits = out.patient * w_cls_.value.transpose();
    out.logits.rowwise() += b_cls_.value.row(0);
    out.probs.resize(B, kNumClasses);
    for (int b = 0; b < B; ++b) {
      const S mx = out.logits.row(b).maxCoeff();
      const auto e = (out.logits.row(b).array() - mx).exp();
      out.probs.row(b) = (e / e.sum()).matrix();
    }
    if (!out.logits.allFinite()) throw NumericalError("non-finite classifier logits");
    return out;
  }

  ModelConfig config_;
  features::ProjectionHead<S> projection_;
  nn::DenseParam<S> w_ih_, w_hh_, b_;
  nn::DenseParam<S> w_pv_, b_pv_;
  nn::DenseParam<S> w_cls_, b_cls_;
};

}  // namespace leukmil::model
