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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leukmil/core/archive.hpp"
#include "leukmil/core/rng.hpp"

namespace leukmil::nn {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRowF = Eigen::Map<RowMatrixF>;
using ConstMapRowF = Eigen::Map<const RowMatrixF>;
// Heap buffers handed to Eigen kernels. A fixed base alignment keeps the
// vectorised summation order, and so every result, independent of where the
// allocator happens to place the buffer.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

// Dense NCHW float tensor.
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  FloatBuffer data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t image_size() const { return static_cast<std::size_t>(c) * h * w; }
  float* image(int i) { return data.data() + i * image_size(); }
  const float* image(int i) const { return data.data() + i * image_size(); }
  float& at(int ni, int ci, int y, int x) { return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x]; }
  float at(int ni, int ci, int y, int x) const {
    return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
  }
};

// A trainable (or frozen) parameter with its gradient accumulator.
struct Param {
  std::string name;
  std::vector<std::int64_t> shape;
  FloatBuffer value;
  FloatBuffer grad;

  Param() = default;
  Param(std::string name_, std::vector<std::int64_t> shape_);

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
  void init_normal(Rng& rng, double stddev);
  void init_uniform(Rng& rng, double bound);
  void fill(float v) { std::fill(value.begin(), value.end(), v); }
};

void store_params(std::span<const Param* const> params, TensorArchive& archive, const std::string& prefix = "");
void load_params(std::span<Param* const> params, const TensorArchive& archive, const std::string& prefix = "");
std::string params_digest(std::span<const Param* const> params);

}  // namespace leukmil::nn
