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

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leukmil/core/archive.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"

namespace leukmil::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Matrix-shaped parameter with a same-shaped gradient accumulator. Used by the
// aggregator, which is templated on the scalar type so gradient checks can run
// in double precision.
template <typename S>
struct DenseParam {
  std::string name;
  Mat<S> value;
  Mat<S> grad;

  DenseParam() = default;
  DenseParam(std::string name_, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name_)), value(Mat<S>::Zero(rows, cols)), grad(Mat<S>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  void init_uniform(Rng& rng, double bound) {
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
  }
};

template <typename S>
void store_dense(const std::vector<const DenseParam<S>*>& params, TensorArchive& archive) {
  for (const auto* p : params) {
    std::vector<float> data(p->value.data(), p->value.data() + p->value.size());
    archive.add(p->name, {p->value.rows(), p->value.cols()}, data);
  }
}

template <typename S>
void load_dense(const std::vector<DenseParam<S>*>& params, const TensorArchive& archive) {
  for (auto* p : params) {
    const auto& t = archive.get(p->name);
    if (t.shape != std::vector<std::int64_t>{p->value.rows(), p->value.cols()}) {
      throw FormatError("parameter '" + p->name + "' has a mismatched shape in the archive");
    }
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<S>(t.data[i]);
  }
}

}  // namespace leukmil::nn
