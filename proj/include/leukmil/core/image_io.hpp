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

#include "leukmil/core/image.hpp"

namespace leukmil {

// 8-bit RGB PNG. Grey and alpha inputs are converted on read. Output bytes
// are a pure function of the raster (no timestamps or text chunks).
Raster read_png(const std::string& path);
void write_png(const Raster& raster, const std::string& path);

}  // namespace leukmil
