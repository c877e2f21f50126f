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

#include <span>
#include <string>
#include <vector>

#include "leukmil/core/types.hpp"
#include "leukmil/nn/tensor.hpp"

namespace leukmil::nn {

struct ConvSpec {
  int in = 0;
  int out = 0;
  int kh = 3;
  int kw = 3;
  int sh = 1;
  int sw = 1;
  int ph = 0;
  int pw = 0;
  bool bias = true;
};

// 2-D convolution via im2col + GEMM. Weight layout [out, in, kh, kw].
class Conv2d {
 public:
  struct Cache {
    int in_h = 0;
    int in_w = 0;
    RowMatrixF cols;  // (in*kh*kw) x (out_h*out_w), single image
  };

  Conv2d() = default;
  Conv2d(const std::string& name, const ConvSpec& spec);

  const ConvSpec& spec() const { return spec_; }
  int out_h(int in_h) const { return (in_h + 2 * spec_.ph - spec_.kh) / spec_.sh + 1; }
  int out_w(int in_w) const { return (in_w + 2 * spec_.pw - spec_.kw) / spec_.sw + 1; }

  // Inference on a batch; all images share one GEMM.
  Tensor forward(const Tensor& x) const;
  // Single-image training path; keeps the column buffer for backward().
  Tensor forward_train(const Tensor& x, Cache& cache) const;
  // Accumulates weight/bias gradients and returns the input gradient.
  Tensor backward(const Tensor& dy, const Cache& cache, bool need_input_grad = true);

  void init_he(Rng& rng);
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  Param weight;
  Param bias;

 private:
  ConvSpec spec_;
};

void relu_inplace(Tensor& x);
// dy *= (y > 0), where y is the ReLU output.
void relu_backward_inplace(Tensor& dy, const Tensor& y);

struct PoolSpec {
  int k = 2;
  int s = 2;
  int p = 0;
  bool ceil_mode = false;
};

int pool_out(int in, const PoolSpec& spec);

Tensor max_pool(const Tensor& x, const PoolSpec& spec, std::vector<int>* argmax = nullptr);
Tensor max_pool_backward(const Tensor& dy, const std::vector<int>& argmax, int in_h, int in_w);
Tensor avg_pool(const Tensor& x, const PoolSpec& spec, bool count_include_pad);
Tensor adaptive_avg_pool(const Tensor& x, int out_h, int out_w);
// N x C matrices of channel means / maxima.
RowMatrixF global_avg_pool(const Tensor& x);
RowMatrixF global_max_pool(const Tensor& x);

// Fully connected layer over row vectors. Weight layout [out, in].
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, bool bias = true);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  RowMatrixF forward(const RowMatrixF& x) const;
  // Accumulates gradients; returns dL/dx.
  RowMatrixF backward(const RowMatrixF& x, const RowMatrixF& dy, bool need_input_grad = true);

  void init_he(Rng& rng);
  void init_normal(Rng& rng, double stddev);
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  Param weight;
  Param bias;

 private:
  int in_ = 0;
  int out_ = 0;
  bool has_bias_ = true;
};

// Inference-mode batch normalisation.
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels, float eps);

  void forward_inplace(Tensor& x) const;
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  Param gamma;
  Param beta;
  Param running_mean;
  Param running_var;

 private:
  float eps_ = 1e-5f;
};

// Inference-mode layer normalisation over the columns of each row.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim, float eps);

  void forward_inplace(RowMatrixF& x) const;
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  Param weight;
  Param bias;

 private:
  float eps_ = 1e-5f;
};

// Exact (erf) GELU.
void gelu_inplace(RowMatrixF& x);

// Region-of-interest bilinear pooling with pixel-aligned sampling.
// `features` is a single-image map with stride `1 / spatial_scale`.
Tensor roi_align(const Tensor& features, std::span<const BoundingBox> rois, int out_size, double spatial_scale,
                 int sampling_ratio);
void roi_align_backward(const Tensor& dy, std::span<const BoundingBox> rois, int out_size, double spatial_scale,
                        int sampling_ratio, Tensor& dfeatures);

// Input normalisation: (pixel / 255 - mean[c]) / std[c], planar output.
Tensor raster_to_tensor(const Raster& raster, std::span<const float, 3> mean, std::span<const float, 3> stddev);

}  // namespace leukmil::nn
