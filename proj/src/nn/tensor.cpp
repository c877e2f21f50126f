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

#include "leukmil/nn/tensor.hpp"

#include <numeric>

#include "leukmil/core/digest.hpp"
#include "leukmil/core/error.hpp"

namespace leukmil::nn {

Param::Param(std::string name_, std::vector<std::int64_t> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
  const auto count = std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
  value.assign(static_cast<std::size_t>(count), 0.0f);
  grad.assign(static_cast<std::size_t>(count), 0.0f);
}

void Param::init_normal(Rng& rng, double stddev) {
  for (auto& v : value) v = static_cast<float>(rng.normal(0.0, stddev));
}

void Param::init_uniform(Rng& rng, double bound) {
  for (auto& v : value) v = static_cast<float>(rng.uniform(-bound, bound));
}

void store_params(std::span<const Param* const> params, TensorArchive& archive, const std::string& prefix) {
  for (const Param* p : params) {
    if (p->size() == 0) continue;
    archive.add(prefix + p->name, p->shape, p->value);
  }
}

void load_params(std::span<Param* const> params, const TensorArchive& archive, const std::string& prefix) {
  for (Param* p : params) {
    if (p->size() == 0) continue;
    const auto& t = archive.get(prefix + p->name);
    if (t.shape != p->shape) {
      throw FormatError("parameter '" + prefix + p->name + "' has a mismatched shape in the archive");
    }
    p->value.assign(t.data.begin(), t.data.end());
  }
}

std::string params_digest(std::span<const Param* const> params) {
  Sha256 sha;
  for (const Param* p : params) {
    sha.update(p->name);
    sha.update_pod(std::span<const float>(p->value));
  }
  return sha.finish();
}

}  // namespace leukmil::nn
