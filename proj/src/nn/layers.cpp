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

#include "leukmil/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "leukmil/core/error.hpp"

namespace leukmil::nn {

namespace {

// Fills columns [col_offset, col_offset + out_h*out_w) of a row-major
// (in*kh*kw) x ld matrix.
void im2col(const float* x, int h, int w, const ConvSpec& s, int out_h, int out_w, float* cols, Eigen::Index ld,
            Eigen::Index col_offset) {
  for (int c = 0; c < s.in; ++c) {
    for (int ki = 0; ki < s.kh; ++ki) {
      for (int kj = 0; kj < s.kw; ++kj) {
        float* row = cols + ((static_cast<Eigen::Index>(c) * s.kh + ki) * s.kw + kj) * ld + col_offset;
        const float* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s.sh - s.ph + ki;
          float* dst = row + static_cast<Eigen::Index>(oy) * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + out_w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s.sw - s.pw + kj;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* cols, int h, int w, const ConvSpec& s, int out_h, int out_w, float* dx) {
  const Eigen::Index ld = static_cast<Eigen::Index>(out_h) * out_w;
  for (int c = 0; c < s.in; ++c) {
    float* plane = dx + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < s.kh; ++ki) {
      for (int kj = 0; kj < s.kw; ++kj) {
        const float* row = cols + ((static_cast<Eigen::Index>(c) * s.kh + ki) * s.kw + kj) * ld;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * s.sh - s.ph + ki;
          if (iy < 0 || iy >= h) continue;
          float* dst = plane + static_cast<std::size_t>(iy) * w;
          const float* src = row + static_cast<Eigen::Index>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * s.sw - s.pw + kj;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvSpec& s) {
  return s.kh == 1 && s.kw == 1 && s.sh == 1 && s.sw == 1 && s.ph == 0 && s.pw == 0;
}

}  // namespace

Conv2d::Conv2d(const std::string& name, const ConvSpec& spec)
    : weight(name + ".weight", {spec.out, spec.in, spec.kh, spec.kw}),
      bias(name + ".bias", {spec.bias ? spec.out : 0}),
      spec_(spec) {}

void Conv2d::init_he(Rng& rng) {
  weight.init_normal(rng, std::sqrt(2.0 / (spec_.in * spec_.kh * spec_.kw)));
  bias.fill(0.0f);
}

std::vector<Param*> Conv2d::params() {
  if (spec_.bias) return {&weight, &bias};
  return {&weight};
}

std::vector<const Param*> Conv2d::params() const {
  if (spec_.bias) return {&weight, &bias};
  return {&weight};
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.c != spec_.in) throw InvariantViolation("conv input channel mismatch for " + weight.name);
  const int oh = out_h(x.h);
  const int ow = out_w(x.w);
  if (oh <= 0 || ow <= 0) throw InvariantViolation("conv input too small for " + weight.name);
  const Eigen::Index kdim = static_cast<Eigen::Index>(spec_.in) * spec_.kh * spec_.kw;
  const Eigen::Index plane = static_cast<Eigen::Index>(oh) * ow;
  ConstMapRowF wmat(weight.value.data(), spec_.out, kdim);
  Tensor y(x.n, spec_.out, oh, ow);

  if (is_pointwise(spec_)) {
    for (int i = 0; i < x.n; ++i) {
      MapRowF out(y.image(i), spec_.out, plane);
      out.noalias() = wmat * ConstMapRowF(x.image(i), spec_.in, plane);
    }
  } else {
    RowMatrixF cols(kdim, plane * x.n);
    for (int i = 0; i < x.n; ++i) im2col(x.image(i), x.h, x.w, spec_, oh, ow, cols.data(), cols.cols(), plane * i);
    RowMatrixF prod = wmat * cols;
    for (int i = 0; i < x.n; ++i) {
      MapRowF(y.image(i), spec_.out, plane) = prod.middleCols(plane * i, plane);
    }
  }
  if (spec_.bias) {
    for (int i = 0; i < x.n; ++i) {
      MapRowF out(y.image(i), spec_.out, plane);
      for (int co = 0; co < spec_.out; ++co) out.row(co).array() += bias.value[co];
    }
  }
  return y;
}

Tensor Conv2d::forward_train(const Tensor& x, Cache& cache) const {
  if (x.n != 1) throw InvariantViolation("conv training path expects a single image");
  const int oh = out_h(x.h);
  const int ow = out_w(x.w);
  const Eigen::Index kdim = static_cast<Eigen::Index>(spec_.in) * spec_.kh * spec_.kw;
  const Eigen::Index plane = static_cast<Eigen::Index>(oh) * ow;
  cache.in_h = x.h;
  cache.in_w = x.w;
  cache.cols.resize(kdim, plane);
  im2col(x.image(0), x.h, x.w, spec_, oh, ow, cache.cols.data(), plane, 0);
  Tensor y(1, spec_.out, oh, ow);
  MapRowF out(y.image(0), spec_.out, plane);
  out.noalias() = ConstMapRowF(weight.value.data(), spec_.out, kdim) * cache.cols;
  if (spec_.bias) {
    for (int co = 0; co < spec_.out; ++co) out.row(co).array() += bias.value[co];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, const Cache& cache, bool need_input_grad) {
  const Eigen::Index kdim = static_cast<Eigen::Index>(spec_.in) * spec_.kh * spec_.kw;
  const Eigen::Index plane = static_cast<Eigen::Index>(dy.h) * dy.w;
  ConstMapRowF dmat(dy.image(0), spec_.out, plane);
  MapRowF(weight.grad.data(), spec_.out, kdim).noalias() += dmat * cache.cols.transpose();
  if (spec_.bias) {
    for (int co = 0; co < spec_.out; ++co) bias.grad[co] += dmat.row(co).sum();
  }
  Tensor dx;
  if (!need_input_grad) return dx;
  RowMatrixF dcols = ConstMapRowF(weight.value.data(), spec_.out, kdim).transpose() * dmat;
  dx = Tensor(1, spec_.in, cache.in_h, cache.in_w);
  col2im(dcols.data(), cache.in_h, cache.in_w, spec_, dy.h, dy.w, dx.image(0));
  return dx;
}

void relu_inplace(Tensor& x) {
  for (auto& v : x.data) v = v > 0.0f ? v : 0.0f;
}

void relu_backward_inplace(Tensor& dy, const Tensor& y) {
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (!(y.data[i] > 0.0f)) dy.data[i] = 0.0f;
  }
}

int pool_out(int in, const PoolSpec& s) {
  const int span = in + 2 * s.p - s.k;
  int out = (s.ceil_mode ? (span + s.s - 1) / s.s : span / s.s) + 1;
  // A ceil-mode window must start inside the (left-padded) input.
  if (s.ceil_mode && (out - 1) * s.s >= in + s.p) --out;
  return out;
}

Tensor max_pool(const Tensor& x, const PoolSpec& s, std::vector<int>* argmax) {
  const int oh = pool_out(x.h, s);
  const int ow = pool_out(x.w, s);
  Tensor y(x.n, x.c, oh, ow);
  if (argmax) argmax->assign(y.size(), -1);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.image(n) + static_cast<std::size_t>(c) * x.h * x.w;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float best = -std::numeric_limits<float>::infinity();
          int best_idx = -1;
          for (int ky = 0; ky < s.k; ++ky) {
            const int iy = oy * s.s - s.p + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < s.k; ++kx) {
              const int ix = ox * s.s - s.p + kx;
              if (ix < 0 || ix >= x.w) continue;
              const float v = plane[iy * x.w + ix];
              if (v > best) {
                best = v;
                best_idx = iy * x.w + ix;
              }
            }
          }
          const std::size_t out_idx = ((static_cast<std::size_t>(n) * x.c + c) * oh + oy) * ow + ox;
          y.data[out_idx] = best;
          if (argmax) (*argmax)[out_idx] = best_idx;
        }
      }
    }
  }
  return y;
}

Tensor max_pool_backward(const Tensor& dy, const std::vector<int>& argmax, int in_h, int in_w) {
  Tensor dx(dy.n, dy.c, in_h, in_w);
  const std::size_t out_plane = static_cast<std::size_t>(dy.h) * dy.w;
  const std::size_t in_plane = static_cast<std::size_t>(in_h) * in_w;
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (argmax[i] < 0) continue;
    const std::size_t nc = i / out_plane;
    dx.data[nc * in_plane + static_cast<std::size_t>(argmax[i])] += dy.data[i];
  }
  return dx;
}

Tensor avg_pool(const Tensor& x, const PoolSpec& s, bool count_include_pad) {
  const int oh = pool_out(x.h, s);
  const int ow = pool_out(x.w, s);
  Tensor y(x.n, x.c, oh, ow);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.image(n) + static_cast<std::size_t>(c) * x.h * x.w;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const int y0 = oy * s.s - s.p;
          const int x0 = ox * s.s - s.p;
          const int y1 = std::min(y0 + s.k, x.h + s.p);
          const int x1 = std::min(x0 + s.k, x.w + s.p);
          const int pool_size = (y1 - y0) * (x1 - x0);
          double sum = 0.0;
          int count = 0;
          for (int iy = std::max(y0, 0); iy < std::min(y1, x.h); ++iy) {
            for (int ix = std::max(x0, 0); ix < std::min(x1, x.w); ++ix) {
              sum += plane[iy * x.w + ix];
              ++count;
            }
          }
          y.at(n, c, oy, ox) = static_cast<float>(sum / (count_include_pad ? pool_size : std::max(count, 1)));
        }
      }
    }
  }
  return y;
}

Tensor adaptive_avg_pool(const Tensor& x, int oh, int ow) {
  Tensor y(x.n, x.c, oh, ow);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.image(n) + static_cast<std::size_t>(c) * x.h * x.w;
      for (int oy = 0; oy < oh; ++oy) {
        const int y0 = (oy * x.h) / oh;
        const int y1 = ((oy + 1) * x.h + oh - 1) / oh;
        for (int ox = 0; ox < ow; ++ox) {
          const int x0 = (ox * x.w) / ow;
          const int x1 = ((ox + 1) * x.w + ow - 1) / ow;
          double sum = 0.0;
          for (int iy = y0; iy < y1; ++iy) {
            for (int ix = x0; ix < x1; ++ix) sum += plane[iy * x.w + ix];
          }
          y.at(n, c, oy, ox) = static_cast<float>(sum / ((y1 - y0) * (x1 - x0)));
        }
      }
    }
  }
  return y;
}

RowMatrixF global_avg_pool(const Tensor& x) {
  RowMatrixF out(x.n, x.c);
  const Eigen::Index plane = static_cast<Eigen::Index>(x.h) * x.w;
  for (int n = 0; n < x.n; ++n) {
    ConstMapRowF m(x.image(n), x.c, plane);
    out.row(n) = m.rowwise().mean().transpose();
  }
  return out;
}

RowMatrixF global_max_pool(const Tensor& x) {
  RowMatrixF out(x.n, x.c);
  const Eigen::Index plane = static_cast<Eigen::Index>(x.h) * x.w;
  for (int n = 0; n < x.n; ++n) {
    ConstMapRowF m(x.image(n), x.c, plane);
    out.row(n) = m.rowwise().maxCoeff().transpose();
  }
  return out;
}

Linear::Linear(const std::string& name, int in, int out, bool bias)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {bias ? out : 0}), in_(in), out_(out), has_bias_(bias) {}

void Linear::init_he(Rng& rng) {
  weight.init_normal(rng, std::sqrt(2.0 / in_));
  bias.fill(0.0f);
}

void Linear::init_normal(Rng& rng, double stddev) {
  weight.init_normal(rng, stddev);
  bias.fill(0.0f);
}

std::vector<Param*> Linear::params() {
  if (has_bias_) return {&weight, &bias};
  return {&weight};
}

std::vector<const Param*> Linear::params() const {
  if (has_bias_) return {&weight, &bias};
  return {&weight};
}

RowMatrixF Linear::forward(const RowMatrixF& x) const {
  if (x.cols() != in_) throw InvariantViolation("linear input dimension mismatch for " + weight.name);
  RowMatrixF y = x * ConstMapRowF(weight.value.data(), out_, in_).transpose();
  if (has_bias_) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.value.data(), out_);
  }
  return y;
}

RowMatrixF Linear::backward(const RowMatrixF& x, const RowMatrixF& dy, bool need_input_grad) {
  MapRowF(weight.grad.data(), out_, in_).noalias() += dy.transpose() * x;
  if (has_bias_) Eigen::Map<Eigen::RowVectorXf>(bias.grad.data(), out_) += dy.colwise().sum();
  if (!need_input_grad) return {};
  return dy * ConstMapRowF(weight.value.data(), out_, in_);
}

BatchNorm2d::BatchNorm2d(const std::string& name, int channels, float eps)
    : gamma(name + ".weight", {channels}),
      beta(name + ".bias", {channels}),
      running_mean(name + ".running_mean", {channels}),
      running_var(name + ".running_var", {channels}),
      eps_(eps) {
  gamma.fill(1.0f);
  running_var.fill(1.0f);
}

void BatchNorm2d::forward_inplace(Tensor& x) const {
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const float scale = gamma.value[c] / std::sqrt(running_var.value[c] + eps_);
      const float shift = beta.value[c] - running_mean.value[c] * scale;
      float* p = x.image(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = p[i] * scale + shift;
    }
  }
}

std::vector<Param*> BatchNorm2d::params() { return {&gamma, &beta, &running_mean, &running_var}; }
std::vector<const Param*> BatchNorm2d::params() const { return {&gamma, &beta, &running_mean, &running_var}; }

LayerNorm::LayerNorm(const std::string& name, int dim, float eps)
    : weight(name + ".weight", {dim}), bias(name + ".bias", {dim}), eps_(eps) {
  weight.fill(1.0f);
}

void LayerNorm::forward_inplace(RowMatrixF& x) const {
  const Eigen::Index d = x.cols();
  if (d != static_cast<Eigen::Index>(weight.size())) throw InvariantViolation("layer norm width mismatch for " + weight.name);
  Eigen::Map<const Eigen::RowVectorXf> g(weight.value.data(), d), b(bias.value.data(), d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    const double mean = row.cast<double>().mean();
    const double var = (row.cast<double>().array() - mean).square().mean();
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    row = ((row.array() - static_cast<float>(mean)) * inv * g.array() + b.array()).matrix();
  }
}

std::vector<Param*> LayerNorm::params() { return {&weight, &bias}; }
std::vector<const Param*> LayerNorm::params() const { return {&weight, &bias}; }

void gelu_inplace(RowMatrixF& x) {
  x = x.unaryExpr([](float v) { return 0.5f * v * (1.0f + std::erf(v * 0.70710678118654752f)); });
}

namespace {

struct BilinearTap {
  int idx[4];
  float weight[4];
  bool valid;
};

BilinearTap bilinear_tap(int h, int w, double y, double x) {
  BilinearTap tap{};
  if (y < -1.0 || y > h || x < -1.0 || x > w) {
    tap.valid = false;
    return tap;
  }
  tap.valid = true;
  y = std::max(y, 0.0);
  x = std::max(x, 0.0);
  int y_low = static_cast<int>(y);
  int x_low = static_cast<int>(x);
  int y_high, x_high;
  if (y_low >= h - 1) {
    y_high = y_low = h - 1;
    y = y_low;
  } else {
    y_high = y_low + 1;
  }
  if (x_low >= w - 1) {
    x_high = x_low = w - 1;
    x = x_low;
  } else {
    x_high = x_low + 1;
  }
  const double ly = y - y_low, lx = x - x_low, hy = 1.0 - ly, hx = 1.0 - lx;
  tap.idx[0] = y_low * w + x_low;
  tap.idx[1] = y_low * w + x_high;
  tap.idx[2] = y_high * w + x_low;
  tap.idx[3] = y_high * w + x_high;
  tap.weight[0] = static_cast<float>(hy * hx);
  tap.weight[1] = static_cast<float>(hy * lx);
  tap.weight[2] = static_cast<float>(ly * hx);
  tap.weight[3] = static_cast<float>(ly * lx);
  return tap;
}

template <typename Visit>
void for_each_sample(const BoundingBox& roi, int h, int w, int out_size, double scale, int ratio, Visit&& visit) {
  const double x1 = roi.x_min * scale - 0.5;
  const double y1 = roi.y_min * scale - 0.5;
  const double bin_w = (roi.x_max - roi.x_min) * scale / out_size;
  const double bin_h = (roi.y_max - roi.y_min) * scale / out_size;
  const float inv = 1.0f / static_cast<float>(ratio * ratio);
  for (int py = 0; py < out_size; ++py) {
    for (int px = 0; px < out_size; ++px) {
      for (int iy = 0; iy < ratio; ++iy) {
        const double y = y1 + py * bin_h + (iy + 0.5) * bin_h / ratio;
        for (int ix = 0; ix < ratio; ++ix) {
          const double x = x1 + px * bin_w + (ix + 0.5) * bin_w / ratio;
          const BilinearTap tap = bilinear_tap(h, w, y, x);
          if (tap.valid) visit(py * out_size + px, tap, inv);
        }
      }
    }
  }
}

}  // namespace

Tensor roi_align(const Tensor& features, std::span<const BoundingBox> rois, int out_size, double spatial_scale,
                 int sampling_ratio) {
  Tensor out(static_cast<int>(rois.size()), features.c, out_size, out_size);
  const std::size_t plane = static_cast<std::size_t>(features.h) * features.w;
  const std::size_t out_plane = static_cast<std::size_t>(out_size) * out_size;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    float* dst = out.image(static_cast<int>(r));
    for_each_sample(rois[r], features.h, features.w, out_size, spatial_scale, sampling_ratio,
                    [&](int bin, const BilinearTap& tap, float inv) {
                      for (int c = 0; c < features.c; ++c) {
                        const float* src = features.image(0) + c * plane;
                        float v = 0.0f;
                        for (int k = 0; k < 4; ++k) v += tap.weight[k] * src[tap.idx[k]];
                        dst[c * out_plane + bin] += v * inv;
                      }
                    });
  }
  return out;
}

void roi_align_backward(const Tensor& dy, std::span<const BoundingBox> rois, int out_size, double spatial_scale,
                        int sampling_ratio, Tensor& dfeatures) {
  const std::size_t plane = static_cast<std::size_t>(dfeatures.h) * dfeatures.w;
  const std::size_t out_plane = static_cast<std::size_t>(out_size) * out_size;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const float* g = dy.image(static_cast<int>(r));
    for_each_sample(rois[r], dfeatures.h, dfeatures.w, out_size, spatial_scale, sampling_ratio,
                    [&](int bin, const BilinearTap& tap, float inv) {
                      for (int c = 0; c < dfeatures.c; ++c) {
                        float* dst = dfeatures.image(0) + c * plane;
                        const float gv = g[c * out_plane + bin] * inv;
                        for (int k = 0; k < 4; ++k) dst[tap.idx[k]] += tap.weight[k] * gv;
                      }
                    });
  }
}

Tensor raster_to_tensor(const Raster& raster, std::span<const float, 3> mean, std::span<const float, 3> stddev) {
  Tensor t(1, 3, raster.height, raster.width);
  const std::size_t plane = static_cast<std::size_t>(raster.height) * raster.width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      t.data[c * plane + i] = (raster.data[i * 3 + c] / 255.0f - mean[c]) / stddev[c];
    }
  }
  return t;
}

}  // namespace leukmil::nn
