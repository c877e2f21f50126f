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

// Forward-only backbone architectures. Parameter names follow the torchvision
// state-dict keys so exported checkpoints load without remapping.
#include <cmath>
#include <deque>
#include <functional>

#include "leukmil/core/error.hpp"
#include "leukmil/core/rng.hpp"
#include "leukmil/features/extractor.hpp"
#include "leukmil/nn/layers.hpp"

namespace leukmil::features {

using nn::Conv2d;
using nn::ConvSpec;
using nn::Linear;
using nn::PoolSpec;
using nn::RowMatrixF;
using nn::Tensor;

namespace {

ConvSpec conv(int in, int out, int k, int s = 1, int p = 0, bool bias = true) {
  return ConvSpec{in, out, k, k, s, s, p, p, bias};
}

ConvSpec conv_hw(int in, int out, int kh, int kw, int ph, int pw) {
  return ConvSpec{in, out, kh, kw, 1, 1, ph, pw, false};
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  int c = 0;
  for (const auto& p : parts) c += p.c;
  Tensor out(parts[0].n, c, parts[0].h, parts[0].w);
  const std::size_t plane = static_cast<std::size_t>(out.h) * out.w;
  for (int n = 0; n < out.n; ++n) {
    float* dst = out.image(n);
    for (const auto& p : parts) {
      std::copy(p.image(n), p.image(n) + p.c * plane, dst);
      dst += p.c * plane;
    }
  }
  return out;
}

RowMatrixF flatten(const Tensor& x) {
  return nn::ConstMapRowF(x.data.data(), x.n, static_cast<Eigen::Index>(x.image_size()));
}

void add_inplace(Tensor& y, const Tensor& x) {
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
}

// Conv, optional inference batch norm, optional ReLU.
struct ConvUnit {
  Conv2d conv;
  nn::BatchNorm2d bn;
  bool has_bn = false;
  bool relu = true;

  Tensor operator()(const Tensor& x) const {
    Tensor y = conv.forward(x);
    if (has_bn) bn.forward_inplace(y);
    if (relu) nn::relu_inplace(y);
    return y;
  }
  void collect(std::vector<nn::Param*>& out) {
    for (auto* p : conv.params()) out.push_back(p);
    if (has_bn) {
      for (auto* p : bn.params()) out.push_back(p);
    }
  }
};

ConvUnit plain(const std::string& name, const ConvSpec& spec, bool relu = true) {
  return ConvUnit{Conv2d(name, spec), {}, false, relu};
}

ConvUnit with_bn(const std::string& conv_name, const std::string& bn_name, const ConvSpec& spec, float eps,
                 bool relu = true) {
  return ConvUnit{Conv2d(conv_name, spec), nn::BatchNorm2d(bn_name, spec.out, eps), true, relu};
}

// Deterministic initialisation by name: He-normal convolutions, fan-in scaled
// linear layers, zero biases; normalisation layers keep identity statistics.
void random_init(std::vector<nn::Param*> params, std::string_view backbone) {
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : backbone) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
  Rng rng = Rng(seed_offset::kExtractor).derive(h);
  for (nn::Param* p : params) {
    const auto& s = p->shape;
    const bool is_weight = p->name.ends_with(".weight") || p->name.ends_with("in_proj_weight");
    if (is_weight && s.size() == 4) {
      p->init_normal(rng, std::sqrt(2.0 / static_cast<double>(s[1] * s[2] * s[3])));
    } else if (is_weight && s.size() == 2) {
      p->init_normal(rng, std::sqrt(1.0 / static_cast<double>(s[1])));
    } else if (p->name == "class_token" || p->name.ends_with("pos_embedding")) {
      p->init_normal(rng, 0.02);
    }
  }
}

class ToyCnn final : public Backbone {
 public:
  ToyCnn() {
    c0_ = plain("conv0", conv(3, 32, 3, 2, 1));
    c1_ = plain("conv1", conv(32, 64, 3, 2, 1));
    c2_ = plain("conv2", conv(64, 96, 3, 2, 1));
  }
  RowMatrixF forward(const Tensor& x) const override {
    const Tensor f = c2_(c1_(c0_(x)));
    RowMatrixF out(f.n, 2 * f.c);
    out << nn::global_avg_pool(f), nn::global_max_pool(f);
    return out;
  }
  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> ps;
    c0_.collect(ps);
    c1_.collect(ps);
    c2_.collect(ps);
    return ps;
  }
  int batch_size() const override { return 64; }

 private:
  ConvUnit c0_, c1_, c2_;
};

class AlexNet final : public Backbone {
 public:
  AlexNet() {
    convs_ = {plain("features.0", conv(3, 64, 11, 4, 2)), plain("features.3", conv(64, 192, 5, 1, 2)),
              plain("features.6", conv(192, 384, 3, 1, 1)), plain("features.8", conv(384, 256, 3, 1, 1)),
              plain("features.10", conv(256, 256, 3, 1, 1))};
    fc1_ = Linear("classifier.1", 256 * 6 * 6, 4096);
    fc2_ = Linear("classifier.4", 4096, 4096);
  }
  RowMatrixF forward(const Tensor& x) const override {
    const PoolSpec pool{3, 2, 0, false};
    Tensor t = nn::max_pool(convs_[0](x), pool);
    t = nn::max_pool(convs_[1](t), pool);
    t = convs_[4](convs_[3](convs_[2](t)));
    t = nn::adaptive_avg_pool(nn::max_pool(t, pool), 6, 6);
    RowMatrixF h = fc1_.forward(flatten(t)).cwiseMax(0.0f);
    return fc2_.forward(h).cwiseMax(0.0f);
  }
  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> ps;
    for (auto& c : convs_) c.collect(ps);
    for (auto* p : fc1_.params()) ps.push_back(p);
    for (auto* p : fc2_.params()) ps.push_back(p);
    return ps;
  }

 private:
  std::vector<ConvUnit> convs_;
  Linear fc1_, fc2_;
};

class Vgg16 final : public Backbone {
 public:
  Vgg16() {
    // -1 marks a 2x2 max pool.
    const int cfg[] = {64, 64, -1, 128, 128, -1, 256, 256, 256, -1, 512, 512, 512, -1, 512, 512, 512, -1};
    int in = 3, index = 0;
    for (int c : cfg) {
      if (c < 0) {
        plan_.push_back(-1);
      } else {
        plan_.push_back(static_cast<int>(convs_.size()));
        convs_.push_back(plain("features." + std::to_string(index), conv(in, c, 3, 1, 1)));
        in = c;
        ++index;  // the ReLU module
      }
      ++index;
    }
    fc1_ = Linear("classifier.0", 512 * 7 * 7, 4096);
    fc2_ = Linear("classifier.3", 4096, 4096);
  }
  RowMatrixF forward(const Tensor& x) const override {
    Tensor t = x;
    for (int step : plan_) t = step < 0 ? nn::max_pool(t, PoolSpec{2, 2, 0, false}) : convs_[step](t);
    t = nn::adaptive_avg_pool(t, 7, 7);
    RowMatrixF h = fc1_.forward(flatten(t)).cwiseMax(0.0f);
    return fc2_.forward(h).cwiseMax(0.0f);
  }
  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> ps;
    for (auto& c : convs_) c.collect(ps);
    for (auto* p : fc1_.params()) ps.push_back(p);
    for (auto* p : fc2_.params()) ps.push_back(p);
    return ps;
  }

 private:
  std::vector<int> plan_;
  std::vector<ConvUnit> convs_;
  Linear fc1_, fc2_;
};

class ResNet50 final : public Backbone {
 public:
  ResNet50() {
    stem_ = with_bn("conv1", "bn1", conv(3, 64, 7, 2, 3, false), 1e-5f);
    const int blocks[] = {3, 4, 6, 3};
    int in = 64;
    for (int layer = 0; layer < 4; ++layer) {
      const int width = 64 << layer;
      for (int b = 0; b < blocks[layer]; ++b) {
        const std::string pre = "layer" + std::to_string(layer + 1) + "." + std::to_string(b) + ".";
        const int stride = (b == 0 && layer > 0) ? 2 : 1;
        Block blk;
        blk.c1 = with_bn(pre + "conv1", pre + "bn1", conv(in, width, 1, 1, 0, false), 1e-5f);
        blk.c2 = with_bn(pre + "conv2", pre + "bn2", conv(width, width, 3, stride, 1, false), 1e-5f);
        blk.c3 = with_bn(pre + "conv3", pre + "bn3", conv(width, width * 4, 1, 1, 0, false), 1e-5f, false);
        if (b == 0) {
          blk.has_down = true;
          blk.down = with_bn(pre + "downsample.0", pre + "downsample.1", conv(in, width * 4, 1, stride, 0, false),
                             1e-5f, false);
        }
        blocks_.push_back(std::move(blk));
        in = width * 4;
      }
    }
  }
  RowMatrixF forward(const Tensor& x) const override {
    Tensor t = nn::max_pool(stem_(x), PoolSpec{3, 2, 1, false});
    for (const auto& blk : blocks_) {
      Tensor y = blk.c3(blk.c2(blk.c1(t)));
      add_inplace(y, blk.has_down ? blk.down(t) : t);
      nn::relu_inplace(y);
      t = std::move(y);
    }
    return nn::global_avg_pool(t);
  }
  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> ps;
    stem_.collect(ps);
    for (auto& blk : blocks_) {
      blk.c1.collect(ps);
      blk.c2.collect(ps);
      blk.c3.collect(ps);
      if (blk.has_down) blk.down.collect(ps);
    }
    return ps;
  }

 private:
  struct Block {
    ConvUnit c1, c2, c3, down;
    bool has_down = false;
  };
  ConvUnit stem_;
  std::vector<Block> blocks_;
};

// Inception-v3 built from named conv-bn-relu units wired by small lambdas.
class InceptionV3 final : public Backbone {
 public:
  InceptionV3() {
    stem();
    inception_a("Mixed_5b", 192, 32);
    inception_a("Mixed_5c", 256, 64);
    inception_a("Mixed_5d", 288, 64);
    inception_b("Mixed_6a", 288);
    inception_c("Mixed_6b", 768, 128);
    inception_c("Mixed_6c", 768, 160);
    inception_c("Mixed_6d", 768, 160);
    inception_c("Mixed_6e", 768, 192);
    inception_d("Mixed_7a", 768);
    inception_e("Mixed_7b", 1280);
    inception_e("Mixed_7c", 2048);
  }
  RowMatrixF forward(const Tensor& x) const override {
    Tensor t = x;
    for (const auto& stage : stages_) t = stage(t);
    return nn::global_avg_pool(t);
  }
  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> ps;
    for (auto& u : units_) u.collect(ps);
    return ps;
  }

 private:
  using Stage = std::function<Tensor(const Tensor&)>;

  const ConvUnit* unit(const std::string& name, const ConvSpec& spec) {
    units_.push_back(with_bn(name + ".conv", name + ".bn", spec, 1e-3f));
    return &units_.back();
  }

  static Tensor avg3(const Tensor& x) { return nn::avg_pool(x, PoolSpec{3, 1, 1, false}, true); }
  static Tensor max3s2(const Tensor& x) { return nn::max_pool(x, PoolSpec{3, 2, 0, false}); }

  void stem() {
    auto a = unit("Conv2d_1a_3x3", conv(3, 32, 3, 2, 0, false));
    auto b = unit("Conv2d_2a_3x3", conv(32, 32, 3, 1, 0, false));
    auto c = unit("Conv2d_2b_3x3", conv(32, 64, 3, 1, 1, false));
    auto d = unit("Conv2d_3b_1x1", conv(64, 80, 1, 1, 0, false));
    auto e = unit("Conv2d_4a_3x3", conv(80, 192, 3, 1, 0, false));
    stages_.push_back([=](const Tensor& x) { return max3s2((*c)((*b)((*a)(x)))); });
    stages_.push_back([=](const Tensor& x) { return max3s2((*e)((*d)(x))); });
  }

  void inception_a(const std::string& n, int in, int pool_features) {
    auto b1 = unit(n + ".branch1x1", conv(in, 64, 1, 1, 0, false));
    auto b5_1 = unit(n + ".branch5x5_1", conv(in, 48, 1, 1, 0, false));
    auto b5_2 = unit(n + ".branch5x5_2", conv(48, 64, 5, 1, 2, false));
    auto d1 = unit(n + ".branch3x3dbl_1", conv(in, 64, 1, 1, 0, false));
    auto d2 = unit(n + ".branch3x3dbl_2", conv(64, 96, 3, 1, 1, false));
    auto d3 = unit(n + ".branch3x3dbl_3", conv(96, 96, 3, 1, 1, false));
    auto bp = unit(n + ".branch_pool", conv(in, pool_features, 1, 1, 0, false));
    stages_.push_back([=](const Tensor& x) {
      return concat_channels({(*b1)(x), (*b5_2)((*b5_1)(x)), (*d3)((*d2)((*d1)(x))), (*bp)(avg3(x))});
    });
  }

  void inception_b(const std::string& n, int in) {
    auto b3 = unit(n + ".branch3x3", conv(in, 384, 3, 2, 0, false));
    auto d1 = unit(n + ".branch3x3dbl_1", conv(in, 64, 1, 1, 0, false));
    auto d2 = unit(n + ".branch3x3dbl_2", conv(64, 96, 3, 1, 1, false));
    auto d3 = unit(n + ".branch3x3dbl_3", conv(96, 96, 3, 2, 0, false));
    stages_.push_back(
        [=](const Tensor& x) { return concat_channels({(*b3)(x), (*d3)((*d2)((*d1)(x))), max3s2(x)}); });
  }

  void inception_c(const std::string& n, int in, int c7) {
    auto b1 = unit(n + ".branch1x1", conv(in, 192, 1, 1, 0, false));
    auto s1 = unit(n + ".branch7x7_1", conv(in, c7, 1, 1, 0, false));
    auto s2 = unit(n + ".branch7x7_2", conv_hw(c7, c7, 1, 7, 0, 3));
    auto s3 = unit(n + ".branch7x7_3", conv_hw(c7, 192, 7, 1, 3, 0));
    auto d1 = unit(n + ".branch7x7dbl_1", conv(in, c7, 1, 1, 0, false));
    auto d2 = unit(n + ".branch7x7dbl_2", conv_hw(c7, c7, 7, 1, 3, 0));
    auto d3 = unit(n + ".branch7x7dbl_3", conv_hw(c7, c7, 1, 7, 0, 3));
    auto d4 = unit(n + ".branch7x7dbl_4", conv_hw(c7, c7, 7, 1, 3, 0));
    auto d5 = unit(n + ".branch7x7dbl_5", conv_hw(c7, 192, 1, 7, 0, 3));
    auto bp = unit(n + ".branch_pool", conv(in, 192, 1, 1, 0, false));
    stages_.push_back([=](const Tensor& x) {
      return concat_channels(
          {(*b1)(x), (*s3)((*s2)((*s1)(x))), (*d5)((*d4)((*d3)((*d2)((*d1)(x))))), (*bp)(avg3(x))});
    });
  }

  void inception_d(const std::string& n, int in) {
    auto a1 = unit(n + ".branch3x3_1", conv(in, 192, 1, 1, 0, false));
    auto a2 = unit(n + ".branch3x3_2", conv(192, 320, 3, 2, 0, false));
    auto s1 = unit(n + ".branch7x7x3_1", conv(in, 192, 1, 1, 0, false));
    auto s2 = unit(n + ".branch7x7x3_2", conv_hw(192, 192, 1, 7, 0, 3));
    auto s3 = unit(n + ".branch7x7x3_3", conv_hw(192, 192, 7, 1, 3, 0));
    auto s4 = unit(n + ".branch7x7x3_4", conv(192, 192, 3, 2, 0, false));
    stages_.push_back([=](const Tensor& x) {
      return concat_channels({(*a2)((*a1)(x)), (*s4)((*s3)((*s2)((*s1)(x)))), max3s2(x)});
    });
  }

  void inception_e(const std::string& n, int in) {
    auto b1 = unit(n + ".branch1x1", conv(in, 320, 1, 1, 0, false));
    auto t1 = unit(n + ".branch3x3_1", conv(in, 384, 1, 1, 0, false));
    auto t2a = unit(n + ".branch3x3_2a", conv_hw(384, 384, 1, 3, 0, 1));
    auto t2b = unit(n + ".branch3x3_2b", conv_hw(384, 384, 3, 1, 1, 0));
    auto d1 = unit(n + ".branch3x3dbl_1", conv(in, 448, 1, 1, 0, false));
    auto d2 = unit(n + ".branch3x3dbl_2", conv(448, 384, 3, 1, 1, false));
    auto d3a = unit(n + ".branch3x3dbl_3a", conv_hw(384, 384, 1, 3, 0, 1));
    auto d3b = unit(n + ".branch3x3dbl_3b", conv_hw(384, 384, 3, 1, 1, 0));
    auto bp = unit(n + ".branch_pool", conv(in, 192, 1, 1, 0, false));
    stages_.push_back([=](const Tensor& x) {
      const Tensor t = (*t1)(x);
      const Tensor d = (*d2)((*d1)(x));
      return concat_channels({(*b1)(x), (*t2a)(t), (*t2b)(t), (*d3a)(d), (*d3b)(d), (*bp)(avg3(x))});
    });
  }

  std::deque<ConvUnit> units_;  // deque keeps unit addresses stable
  std::vector<Stage> stages_;
};

class VitB16 final : public Backbone {
 public:
  static constexpr int kDim = 768;
  static constexpr int kHeads = 12;
  static constexpr int kMlp = 3072;
  static constexpr int kLayers = 12;
  static constexpr int kPatch = 16;
  static constexpr int kTokens = (224 / kPatch) * (224 / kPatch) + 1;

  VitB16()
      : proj_("conv_proj", ConvSpec{3, kDim, kPatch, kPatch, kPatch, kPatch, 0, 0, true}),
        class_token_("class_token", {1, 1, kDim}),
        pos_embedding_("encoder.pos_embedding", {1, kTokens, kDim}),
        final_ln_("encoder.ln", kDim, 1e-6f) {
    for (int i = 0; i < kLayers; ++i) {
      const std::string pre = "encoder.layers.encoder_layer_" + std::to_string(i) + ".";
      Layer l;
      l.ln1 = nn::LayerNorm(pre + "ln_1", kDim, 1e-6f);
      l.in_w = nn::Param(pre + "self_attention.in_proj_weight", {3 * kDim, kDim});
      l.in_b = nn::Param(pre + "self_attention.in_proj_bias", {3 * kDim});
      l.out = Linear(pre + "self_attention.out_proj", kDim, kDim);
      l.ln2 = nn::LayerNorm(pre + "ln_2", kDim, 1e-6f);
      l.fc1 = Linear(pre + "mlp.0", kDim, kMlp);
      l.fc2 = Linear(pre + "mlp.3", kMlp, kDim);
      layers_.push_back(std::move(l));
    }
  }

  RowMatrixF forward(const Tensor& x) const override {
    const Tensor patches = proj_.forward(x);
    const Eigen::Index n_patch = static_cast<Eigen::Index>(patches.h) * patches.w;
    if (n_patch + 1 != kTokens) throw InvariantViolation("vit_b16 expects 224x224 input");
    RowMatrixF out(x.n, kDim);
    nn::ConstMapRowF pos(pos_embedding_.value.data(), kTokens, kDim);
    for (int n = 0; n < x.n; ++n) {
      RowMatrixF tokens(kTokens, kDim);
      tokens.row(0) = Eigen::Map<const Eigen::RowVectorXf>(class_token_.value.data(), kDim);
      tokens.bottomRows(n_patch) = nn::ConstMapRowF(patches.image(n), kDim, n_patch).transpose();
      tokens += pos;
      for (const auto& l : layers_) encoder_layer(l, tokens);
      final_ln_.forward_inplace(tokens);
      out.row(n) = tokens.row(0);
    }
    return out;
  }

  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> ps{&proj_.weight, &proj_.bias, &class_token_, &pos_embedding_};
    for (auto& l : layers_) {
      for (auto* p : l.ln1.params()) ps.push_back(p);
      ps.push_back(&l.in_w);
      ps.push_back(&l.in_b);
      for (auto* p : l.out.params()) ps.push_back(p);
      for (auto* p : l.ln2.params()) ps.push_back(p);
      for (auto* p : l.fc1.params()) ps.push_back(p);
      for (auto* p : l.fc2.params()) ps.push_back(p);
    }
    for (auto* p : final_ln_.params()) ps.push_back(p);
    return ps;
  }

 private:
  struct Layer {
    nn::LayerNorm ln1, ln2;
    nn::Param in_w, in_b;
    Linear out, fc1, fc2;
  };

  static void encoder_layer(const Layer& l, RowMatrixF& x) {
    constexpr int kHeadDim = kDim / kHeads;
    RowMatrixF h = x;
    l.ln1.forward_inplace(h);
    RowMatrixF qkv = h * nn::ConstMapRowF(l.in_w.value.data(), 3 * kDim, kDim).transpose();
    qkv.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(l.in_b.value.data(), 3 * kDim);
    RowMatrixF attn(x.rows(), kDim);
    const float scale = 1.0f / std::sqrt(static_cast<float>(kHeadDim));
    for (int head = 0; head < kHeads; ++head) {
      const auto q = qkv.middleCols(head * kHeadDim, kHeadDim);
      const auto k = qkv.middleCols(kDim + head * kHeadDim, kHeadDim);
      const auto v = qkv.middleCols(2 * kDim + head * kHeadDim, kHeadDim);
      RowMatrixF s = (q * k.transpose()) * scale;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        auto row = s.row(r);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      attn.middleCols(head * kHeadDim, kHeadDim) = s * v;
    }
    x += l.out.forward(attn);
    h = x;
    l.ln2.forward_inplace(h);
    RowMatrixF m = l.fc1.forward(h);
    nn::gelu_inplace(m);
    x += l.fc2.forward(m);
  }

  Conv2d proj_;
  nn::Param class_token_, pos_embedding_;
  std::vector<Layer> layers_;
  nn::LayerNorm final_ln_;
};

}  // namespace

std::unique_ptr<Backbone> build_backbone(std::string_view name) {
  const std::string canonical = backbone_spec(name).name;
  std::unique_ptr<Backbone> b;
  if (canonical == "toy_cnn") b = std::make_unique<ToyCnn>();
  if (canonical == "alexnet") b = std::make_unique<AlexNet>();
  if (canonical == "vgg16") b = std::make_unique<Vgg16>();
  if (canonical == "resnet50") b = std::make_unique<ResNet50>();
  if (canonical == "inception_v3") b = std::make_unique<InceptionV3>();
  if (canonical == "vit_b16") b = std::make_unique<VitB16>();
  random_init(b->params(), canonical);
  return b;
}

}  // namespace leukmil::features
