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

#include <algorithm>
#include <vector>

#include "leukmil/detect/average_precision.hpp"

namespace leukmil::testing {

// Reference AP: exhaustive greedy matching, then the interpolated precision
// max_{r' >= r} p(r') integrated over every recall increment.
inline double brute_force_ap(const std::vector<detect::ImageDetections>& images, double thr) {
  struct P { double score; std::size_t img, idx; };
  std::vector<P> all;
  int n_gt = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    n_gt += static_cast<int>(images[i].ground_truth.size());
    for (std::size_t k = 0; k < images[i].predictions.size(); ++k) all.push_back({images[i].predictions[k].score, i, k});
  }
  std::stable_sort(all.begin(), all.end(), [](const P& a, const P& b) { return a.score > b.score; });
  std::vector<std::vector<bool>> used(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) used[i].assign(images[i].ground_truth.size(), false);
  std::vector<double> prec, rec;
  int tp = 0;
  for (std::size_t r = 0; r < all.size(); ++r) {
    const auto& im = images[all[r].img];
    int best = -1;
    double best_iou = thr;
    for (std::size_t g = 0; g < im.ground_truth.size(); ++g) {
      const double o = iou(im.predictions[all[r].idx], im.ground_truth[g]);
      if (!used[all[r].img][g] && (o > best_iou || (o == best_iou && best < 0))) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      used[all[r].img][best] = true;
      ++tp;
    }
    prec.push_back(static_cast<double>(tp) / (r + 1));
    rec.push_back(static_cast<double>(tp) / n_gt);
  }
  double ap = 0, prev = 0;
  for (std::size_t r = 0; r < rec.size(); ++r) {
    if (rec[r] == prev) continue;
    double best = 0;
    for (std::size_t s = r; s < rec.size(); ++s) best = std::max(best, prec[s]);
    ap += (rec[r] - prev) * best;
    prev = rec[r];
  }
  return ap;
}

}  // namespace leukmil::testing
