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

// Label-space spatial pyramid disparity between patches.
//
// A patch is described at three levels: the whole patch, its 2x2 quadrants
// and its 4x4 cells. Each of the 21 sub-patches gets a semantic vector (class
// proportions over annotated pixels). The disparity is
//
//   D = 16 * ||dV||^2 (level 0) + 4 * sum_4 ||dV||^2 (level 1) + 1 * sum_16 ||dV||^2 (level 2)
//
// so each level contributes at most 32 and D lies in [0, 96].

#include <array>
#include <cstddef>
#include <vector>

#include "segda/labels.hpp"
#include "segda/segnet.hpp"

namespace segda {

inline constexpr std::size_t kPyramidLevels = 3;
inline constexpr std::size_t kPyramidCells = 21;  // 1 + 4 + 16
inline constexpr double kMaxDisparity = 96.0;

enum class MatchingStrategy { kPyramid, kExact };

/// Class proportions over non-VOID pixels; all zero for a fully VOID patch.
std::vector<double> semantic_vector(const LabelMap& patch, std::size_t num_classes);

struct DisparityBreakdown {
  double total = 0.0;
  std::array<double, kPyramidLevels> weighted{};  // per level, after the N_{2-m} weight
};

DisparityBreakdown pyramid_disparity_detail(const LabelMap& a, const LabelMap& b, std::size_t num_classes);
double pyramid_disparity(const LabelMap& a, const LabelMap& b, std::size_t num_classes);

/// Fraction of differing pixels, scaled to [0, 96]. Pixels VOID in both
/// patches are ignored; a VOID pixel against a labeled one counts as differing.
double exact_disparity(const LabelMap& a, const LabelMap& b);

struct DisparityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

/// Pyramid descriptors (21 semantic vectors) of every patch of a label map,
/// computed from an integral histogram.
class PyramidDescriptors {
 public:
  PyramidDescriptors(const LabelMap& labels, const PatchGrid& grid, std::size_t num_classes);

  std::size_t patches() const { return patches_; }
  // Semantic vector of sub-patch `cell` (0 whole, 1..4 quadrants, 5..20 cells).
  const double* vector(std::size_t patch, std::size_t cell) const {
    return data_.data() + (patch * kPyramidCells + cell) * num_classes_;
  }
  std::size_t num_classes() const { return num_classes_; }

 private:
  std::size_t patches_;
  std::size_t num_classes_;
  std::vector<double> data_;
};

DisparityBreakdown descriptor_disparity(const PyramidDescriptors& a, std::size_t pa, const PyramidDescriptors& b,
                                        std::size_t pb);

/// Entry (i, j) = disparity(patch i of a, patch j of b).
DisparityMatrix disparity_matrix(const LabelMap& a, const LabelMap& b, const PatchGrid& grid,
                                 std::size_t num_classes, MatchingStrategy strategy = MatchingStrategy::kPyramid);

}  // namespace segda
