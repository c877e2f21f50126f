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

#include <cmath>
#include <functional>
#include <span>
#include <utility>

#include "doctest.h"
#include "leukmil/core/archive.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/nn/adam.hpp"
#include "leukmil/nn/layers.hpp"

using namespace leukmil;
using namespace leukmil::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng) {
  Tensor t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

// Central difference of f at values[i]; f is linear in the probe, so a
// moderate step keeps float rounding small.
double numeric(std::span<float> values, std::size_t i, const std::function<double()>& f, float h = 1e-2f) {
  const float keep = values[i];
  values[i] = keep + h;
  const double up = f();
  values[i] = keep - h;
  const double down = f();
  values[i] = keep;
  return (up - down) / (2.0 * h);
}

void check_close(double analytic, double num) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(num)});
  CHECK(std::abs(analytic - num) / scale < 2e-2);
}

}  // namespace

TEST_CASE("conv2d forward matches a direct convolution") {
  Rng rng(1);
  Conv2d conv("c", {2, 3, 3, 3, 2, 2, 1, 1, true});
  conv.init_he(rng);
  for (auto& b : conv.bias.value) b = static_cast<float>(rng.normal());
  const Tensor x = random_tensor(2, 2, 7, 6, rng);
  const Tensor y = conv.forward(x);
  REQUIRE(y.h == conv.out_h(7));
  REQUIRE(y.w == conv.out_w(6));
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 3; ++o)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox) {
          double s = conv.bias.value[o];
          for (int i = 0; i < 2; ++i)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                if (iy < 0 || ix < 0 || iy >= 7 || ix >= 6) continue;
                s += conv.weight.value[((o * 2 + i) * 3 + ky) * 3 + kx] * x.at(n, i, iy, ix);
              }
          CHECK(y.at(n, o, oy, ox) == doctest::Approx(s).epsilon(1e-5));
        }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(2);
  Conv2d conv("c", {2, 3, 3, 3, 1, 1, 1, 1, true});
  conv.init_he(rng);
  Tensor x = random_tensor(1, 2, 6, 5, rng);
  const Tensor probe = random_tensor(1, 3, 6, 5, rng);
  auto loss = [&] { return dot(conv.forward(x).data, probe.data); };
  Conv2d::Cache cache;
  conv.forward_train(x, cache);
  conv.weight.zero_grad();
  conv.bias.zero_grad();
  const Tensor dx = conv.backward(probe, cache);
  for (std::size_t i : {0u, 7u, 20u, 53u}) check_close(conv.weight.grad[i], numeric(conv.weight.value, i, loss));
  for (std::size_t i : {0u, 2u}) check_close(conv.bias.grad[i], numeric(conv.bias.value, i, loss));
  for (std::size_t i : {0u, 11u, 29u, 59u}) check_close(dx.data[i], numeric(x.data, i, loss));
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(3);
  Linear fc("fc", 5, 4);
  fc.init_he(rng);
  RowMatrixF x = RowMatrixF::Random(3, 5);
  const RowMatrixF probe = RowMatrixF::Random(3, 4);
  auto loss = [&] { return static_cast<double>((fc.forward(x).array() * probe.array()).sum()); };
  fc.weight.zero_grad();
  fc.bias.zero_grad();
  const RowMatrixF dx = fc.backward(x, probe);
  for (std::size_t i : {0u, 6u, 19u}) check_close(fc.weight.grad[i], numeric(fc.weight.value, i, loss));
  check_close(fc.bias.grad[3], numeric(fc.bias.value, 3, loss));
  std::vector<float> xv(x.data(), x.data() + x.size());
  auto loss_x = [&] {
    const RowMatrixF xm = Eigen::Map<RowMatrixF>(xv.data(), 3, 5);
    return static_cast<double>((fc.forward(xm).array() * probe.array()).sum());
  };
  check_close(dx(1, 2), numeric(xv, 1 * 5 + 2, loss_x));
}

TEST_CASE("max pool routes gradients to the argmax") {
  Tensor x(1, 1, 4, 4);
  for (int i = 0; i < 16; ++i) x.data[i] = static_cast<float>((i * 7) % 16);
  std::vector<int> argmax;
  const Tensor y = max_pool(x, PoolSpec{2, 2, 0, false}, &argmax);
  REQUIRE(y.h == 2);
  Tensor dy(1, 1, 2, 2, 1.0f);
  const Tensor dx = max_pool_backward(dy, argmax, 4, 4);
  double total = 0;
  for (int i = 0; i < 16; ++i) {
    total += dx.data[i];
    if (dx.data[i] != 0.0f) {
      bool is_max = false;
      for (float v : y.data) is_max |= v == x.data[i];
      CHECK(is_max);
    }
  }
  CHECK(total == 4.0);
}

TEST_CASE("roi align backward is the adjoint of forward") {
  Rng rng(4);
  const Tensor f = random_tensor(1, 3, 10, 12, rng);
  const std::vector<BoundingBox> rois{{8, 8, 60, 50}, {0, 0, 95, 79}, {30.5, 10.25, 40.75, 70.0}};
  const Tensor y = roi_align(f, rois, 7, 1.0 / 8, 2);
  const Tensor probe = random_tensor(y.n, y.c, y.h, y.w, rng);
  Tensor df(1, 3, 10, 12);
  roi_align_backward(probe, rois, 7, 1.0 / 8, 2, df);
  // <A f, p> == <f, A^T p>
  CHECK(dot(y.data, probe.data) == doctest::Approx(dot(f.data, df.data)).epsilon(1e-4));
}

TEST_CASE("layer norm normalises rows") {
  LayerNorm ln("ln", 6, 1e-6f);
  std::fill(ln.weight.value.begin(), ln.weight.value.end(), 1.0f);
  RowMatrixF x = RowMatrixF::Random(4, 6) * 3.0f;
  x.array() += 2.0f;
  ln.forward_inplace(x);
  for (int r = 0; r < 4; ++r) {
    CHECK(x.row(r).mean() == doctest::Approx(0.0).epsilon(1e-5).scale(1));
    const double var = (x.row(r).array().square()).mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("gelu matches the erf definition") {
  RowMatrixF x(1, 5);
  x << -3.0f, -0.5f, 0.0f, 0.7f, 2.5f;
  RowMatrixF y = x;
  gelu_inplace(y);
  for (int i = 0; i < 5; ++i) {
    const double v = x(0, i);
    CHECK(y(0, i) == doctest::Approx(0.5 * v * (1 + std::erf(v / std::sqrt(2.0)))).epsilon(1e-6));
  }
}

TEST_CASE("param archive round trip and digest") {
  Rng rng(5);
  Linear a("fc", 3, 2), b("fc", 3, 2);
  a.init_he(rng);
  TensorArchive ar;
  const auto pa = std::as_const(a).params();
  store_params(pa, ar);
  const auto pb = b.params();
  load_params(pb, ar);
  CHECK(b.weight.value == a.weight.value);
  CHECK(params_digest(pa) == params_digest(std::as_const(b).params()));
  Linear wrong("fc", 4, 2);
  const auto pw = wrong.params();
  CHECK_THROWS(load_params(pw, ar));
}

TEST_CASE("adam minimises a quadratic") {
  std::vector<float> x{3.0f, -2.0f};
  std::vector<float> g(2);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam<float> opt(cfg);
  opt.add(x, g);
  for (int step = 0; step < 500; ++step) {
    g[0] = 2 * x[0];
    g[1] = 2 * (x[1] - 1);
    opt.step();
  }
  CHECK(std::abs(x[0]) < 1e-2);
  CHECK(std::abs(x[1] - 1) < 1e-2);
  CHECK(opt.steps() == 500);
}
