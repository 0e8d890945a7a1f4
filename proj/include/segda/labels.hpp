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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "segda/segnet.hpp"

namespace segda {

inline constexpr std::uint8_t kVoid = 255;

enum class Domain { kSource, kTarget };

const char* domain_name(Domain d);

/// Per-pixel class indices, row-major, kVoid for unannotated pixels.
struct LabelMap {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(std::size_t height, std::size_t width, std::uint8_t fill = 0)
      : h(height), w(width), data(height * width, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * w + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * w + x]; }
  std::size_t size() const { return data.size(); }

  LabelMap crop(const Rect& r) const;
  std::size_t count_annotated() const;
  /// Throws naming `source` and the first offending pixel if any label is
  /// neither kVoid nor below num_classes.
  void validate(std::size_t num_classes, const std::string& source) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

}  // namespace segda
