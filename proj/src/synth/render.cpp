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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "leukmil/core/error.hpp"
#include "leukmil/synth/generator.hpp"

namespace leukmil::synth {

namespace {

constexpr double kPi = std::numbers::pi;

struct Rgb {
  double r, g, b;
};

// Radial outline r(theta) = base * (1 + sum_k a_k sin(k theta + phase_k)).
struct Outline {
  double base = 1;
  double amp[3] = {0, 0, 0};
  double phase[3] = {0, 0, 0};

  double radius(double theta) const {
    double s = 0;
    for (int k = 0; k < 3; ++k) s += amp[k] * std::sin((k + 2) * theta + phase[k]);
    return base * (1.0 + s);
  }
};

Outline make_outline(double base, double irregularity, Rng& rng) {
  Outline o;
  o.base = base;
  for (int k = 0; k < 3; ++k) {
    o.amp[k] = irregularity * rng.uniform(0.3, 1.0) / (k + 1);
    o.phase[k] = rng.uniform(0, 2 * kPi);
  }
  return o;
}

void blend(Raster& img, int x, int y, const Rgb& c, double alpha) {
  if (alpha <= 0) return;
  alpha = std::min(alpha, 1.0);
  const double src[3] = {c.r, c.g, c.b};
  for (int ch = 0; ch < 3; ++ch) {
    const double v = img.at(x, y, ch) * (1 - alpha) + src[ch] * alpha;
    img.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
}

// Anti-aliased filled ellipse with axes (a, b) rotated by `angle`.
void fill_ellipse(Raster& img, double cx, double cy, double a, double b, double angle, const Rgb& color,
                  double alpha) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double reach = std::max(a, b) + 1.5;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + reach)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = dx * ca + dy * sa, v = -dx * sa + dy * ca;
      const double rho = std::sqrt((u * u) / (a * a) + (v * v) / (b * b));
      // Signed distance approximated along the radial direction.
      const double edge = (1.0 - rho) * std::min(a, b);
      blend(img, x, y, color, alpha * std::clamp(edge + 0.5, 0.0, 1.0));
    }
  }
}

void fill_outline(Raster& img, double cx, double cy, const Outline& outline, const Rgb& color) {
  const double reach = outline.base * 1.6 + 1.5;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + reach)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double r = outline.radius(std::atan2(dy, dx));
      blend(img, x, y, color, std::clamp(r - d + 0.5, 0.0, 1.0));
    }
  }
}

}  // namespace

GeneratedImage render_image(const SynthConfig& config, const std::vector<CellClass>& classes,
                            const std::string& image_id, Rng& rng) {
  GeneratedImage out;
  const int w = config.image_width, h = config.image_height;
  Raster img(w, h);

  // Per-image stain: background tint and a multiplicative channel jitter
  // applied to every stained structure.
  const double tint = rng.uniform(-config.background_tint, config.background_tint);
  double stain[3];
  for (double& s : stain) s = 1.0 + rng.uniform(-config.stain_jitter, config.stain_jitter);
  const Rgb background{config.background[0] + tint, config.background[1] + tint * 0.5,
                       config.background[2] + tint};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(background.r, 0.0, 255.0));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(background.g, 0.0, 255.0));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(background.b, 0.0, 255.0));
    }
  }
  const Rgb rbc{218 * stain[0], 160 * stain[1], 170 * stain[2]};
  for (int i = 0; i < config.red_cells_per_image; ++i) {
    const double r = rng.uniform(6.0, 8.5);
    fill_ellipse(img, rng.uniform(0, w), rng.uniform(0, h), r, r * rng.uniform(0.85, 1.0), rng.uniform(0, kPi), rbc,
                 0.55);
  }

  // Rejection placement with disjoint-box budget.
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const CellClass cls = classes[i];
    const bool blast = cls == CellClass::kBlast;
    const Range& cell_r = blast ? config.blast_cell_radius : config.normal_cell_radius;
    const Range& nuc_r = blast ? config.blast_nucleus_radius : config.normal_nucleus_radius;
    CellTruth truth;
    truth.cell_class = cls;
    truth.cell_radius = rng.uniform(cell_r.lo, cell_r.hi);
    truth.nucleus_radius = rng.uniform(nuc_r.lo, nuc_r.hi);
    const double minor = truth.cell_radius * (1.0 - rng.uniform(0.0, config.max_eccentricity));
    const double angle = rng.uniform(0, kPi);
    const double irregular = blast ? config.blast_irregularity : config.normal_irregularity;
    const Outline outline = make_outline(truth.nucleus_radius, irregular, rng);
    const double off = truth.cell_radius - truth.nucleus_radius;
    const double shift = blast ? 0.15 * off : 0.35 * off;
    const double theta = rng.uniform(0, 2 * kPi);
    const double nucleus_reach = shift + truth.nucleus_radius * (1.0 + outline.amp[0] + outline.amp[1] + outline.amp[2]);
    const double hw = std::max(
        nucleus_reach,
        std::sqrt(std::pow(truth.cell_radius * std::cos(angle), 2) + std::pow(minor * std::sin(angle), 2)));
    const double hh = std::max(
        nucleus_reach,
        std::sqrt(std::pow(truth.cell_radius * std::sin(angle), 2) + std::pow(minor * std::cos(angle), 2)));

    bool placed = false;
    for (int attempt = 0; attempt < config.placement_attempts && !placed; ++attempt) {
      const double cx = rng.uniform(hw + 1.5, w - hw - 1.5);
      const double cy = rng.uniform(hh + 1.5, h - hh - 1.5);
      BoundingBox box;
      box.x_min = std::floor(cx - hw - 1.0);
      box.y_min = std::floor(cy - hh - 1.0);
      box.x_max = std::ceil(cx + hw + 1.0);
      box.y_max = std::ceil(cy + hh + 1.0);
      box.cell_class = cls;
      bool ok = box.x_min >= 0 && box.y_min >= 0 && box.x_max <= w && box.y_max <= h;
      for (const auto& other : out.cells) {
        if (!ok) break;
        const double overlap = iou(box, other.box);
        ok = config.max_overlap_iou > 0 ? overlap <= config.max_overlap_iou : overlap == 0.0;
      }
      if (!ok) continue;
      truth.center_x = cx;
      truth.center_y = cy;
      truth.box = box;
      placed = true;

      const Rgb cytoplasm = blast ? Rgb{182 * stain[0], 178 * stain[1], 222 * stain[2]}
                                  : Rgb{205 * stain[0], 186 * stain[1], 224 * stain[2]};
      fill_ellipse(img, cx, cy, truth.cell_radius, minor, angle, cytoplasm, 1.0);
      const Rgb nucleus = blast ? Rgb{98 * stain[0], 58 * stain[1], 150 * stain[2]}
                                : Rgb{88 * stain[0], 52 * stain[1], 132 * stain[2]};
      fill_outline(img, cx + shift * std::cos(theta), cy + shift * std::sin(theta), outline, nucleus);
    }
    if (!placed) {
      throw ConfigError("could not place cell " + std::to_string(i) + " of image '" + image_id +
                        "' within the overlap budget");
    }
    out.cells.push_back(truth);
  }

  if (config.noise_stddev > 0) {
    for (auto& v : img.data) {
      v = static_cast<std::uint8_t>(std::clamp(std::lround(v + rng.normal(0.0, config.noise_stddev)), 0L, 255L));
    }
  }

  out.image.image_id = image_id;
  out.image.pixels = std::move(img);
  for (const auto& c : out.cells) out.image.boxes.push_back(c.box);
  return out;
}

double nucleus_pixel_fraction(const Raster& crop) {
  std::size_t dark = 0, total = 0;
  for (std::size_t i = 0; i + 2 < crop.data.size(); i += 3) {
    const int r = crop.data[i], g = crop.data[i + 1], b = crop.data[i + 2];
    if (r == 0 && g == 0 && b == 0) continue;  // padding
    ++total;
    if (g < 110 && r < 150) ++dark;
  }
  return total == 0 ? 0.0 : static_cast<double>(dark) / total;
}

}  // namespace leukmil::synth
