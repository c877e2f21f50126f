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
#include <string_view>
#include <vector>

#include "leukmil/core/error.hpp"
#include "leukmil/nn/dense.hpp"

namespace leukmil::features {

enum class Activation { kRelu, kNone };

inline std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "none"; }
inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "none") return Activation::kNone;
  throw ConfigError("unknown activation '" + std::string(s) + "' (expected relu or none)");
}

// Trainable affine map d_g -> 256 followed by an optional rectifier. Rows of
// the input are independent cell feature vectors.
template <typename S>
class ProjectionHead {
 public:
  static constexpr int kOutputDim = 256;
  using Mat = nn::Mat<S>;

  struct Cache {
    Mat input;
    Mat output;
  };

  ProjectionHead() = default;
  ProjectionHead(int in_dim, Activation activation, Rng& rng)
      : activation_(activation), weight("projection.weight", kOutputDim, in_dim), bias("projection.bias", 1, kOutputDim) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    weight.init_uniform(rng, bound);
    bias.init_uniform(rng, bound);
  }

  int in_dim() const { return static_cast<int>(weight.value.cols()); }
  Activation activation() const { return activation_; }

  Mat forward(const Mat& x) const {
    if (x.cols() != weight.value.cols()) {
      throw InvariantViolation("projection expects " + std::to_string(weight.value.cols()) + "-d input, got " +
                               std::to_string(x.cols()));
    }
    Mat y = x * weight.value.transpose();
    y.rowwise() += bias.value.row(0);
    if (activation_ == Activation::kRelu) y = y.cwiseMax(S(0));
    return y;
  }

  Mat forward(const Mat& x, Cache& cache) const {
    cache.input = x;
    cache.output = forward(x);
    return cache.output;
  }

  // Accumulates parameter gradients. Inputs are frozen features, so no input
  // gradient is produced.
  void backward(const Cache& cache, const Mat& dy) {
    Mat dz = dy;
    if (activation_ == Activation::kRelu) dz = (cache.output.array() > S(0)).select(dy, S(0));
    weight.grad.noalias() += dz.transpose() * cache.input;
    bias.grad.row(0) += dz.colwise().sum();
  }

  std::vector<nn::DenseParam<S>*> params() { return {&weight, &bias}; }
  std::vector<const nn::DenseParam<S>*> params() const { return {&weight, &bias}; }

 private:
  Activation activation_ = Activation::kRelu;

 public:
  nn::DenseParam<S> weight;
  nn::DenseParam<S> bias;
};

}  // namespace leukmil::features
