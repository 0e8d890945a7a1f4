// Copyright 2026 The segda Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include "segda/labels.hpp"
#include "segda/tensor.hpp"

namespace segda {

/// 8-bit RGB PNG -> [3, H, W] in [0, 1] (value / 255).
Tensor read_rgb_png(const std::string& path);
/// [3, H, W] in [0, 1] -> 8-bit RGB PNG, rounded to nearest, clamped.
void write_rgb_png(const std::string& path, const Tensor& image);

/// Single-channel 8-bit PNG of class indices (255 = VOID).
LabelMap read_label_png(const std::string& path);
void write_label_png(const std::string& path, const LabelMap& labels);

/// Color-coded RGB rendering of a label map; VOID is black.
void write_color_label_png(const std::string& path, const LabelMap& labels);

}  // namespace segda
