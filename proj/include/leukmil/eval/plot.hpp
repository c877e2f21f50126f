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

#include <filesystem>
#include <string>
#include <vector>

namespace leukmil::eval {

struct PlotPoint {
  double x = 0;
  std::string series;
  double value = 0;
};

struct PlotData {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotPoint> points;

  void add(double x, std::string series, double value) { points.push_back({x, std::move(series), value}); }
};

// CSV with a "# config_digest=<hex>" first line, then "x,series,value" rows.
void write_plot_csv(const PlotData& plot, const std::string& config_digest, const std::filesystem::path& path);

// Line chart, one colour per series in first-appearance order, y in [0, 1]
// unless a value falls outside.
void render_plot_png(const PlotData& plot, const std::filesystem::path& path, int width = 480, int height = 320);

}  // namespace leukmil::eval
