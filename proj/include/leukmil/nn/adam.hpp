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
#include <span>
#include <vector>

namespace leukmil::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW-style) when non-zero
  double grad_clip_norm = 0.0;  // global L2 clip; 0 disables
};

// Adam over a fixed list of (value, gradient) buffers. The buffer list must be
// registered in the same order on every step.
template <typename T>
class Adam {
 public:
  struct Slot {
    std::span<T> value;
    std::span<const T> grad;
  };

  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void add(std::span<T> value, std::span<const T> grad) {
    slots_.push_back({value, grad});
    m_.emplace_back(value.size(), T(0));
    v_.emplace_back(value.size(), T(0));
  }

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  long steps() const { return t_; }

  void step() {
    ++t_;
    double scale = 1.0;
    if (config_.grad_clip_norm > 0) {
      double sq = 0.0;
      for (const auto& s : slots_) {
        for (T g : s.grad) sq += static_cast<double>(g) * g;
      }
      const double norm = std::sqrt(sq);
      if (norm > config_.grad_clip_norm) scale = config_.grad_clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      auto& s = slots_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < s.value.size(); ++i) {
        const double g = static_cast<double>(s.grad[i]) * scale;
        m[i] = static_cast<T>(config_.beta1 * m[i] + (1.0 - config_.beta1) * g);
        v[i] = static_cast<T>(config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        double update = lr * mhat / (std::sqrt(vhat) + config_.epsilon);
        if (config_.weight_decay > 0) update += lr * config_.weight_decay * s.value[i];
        s.value[i] = static_cast<T>(s.value[i] - update);
      }
    }
  }

 private:
  AdamConfig config_;
  std::vector<Slot> slots_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  long t_ = 0;
};

}  // namespace leukmil::nn
