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

#include "segda/disparity.hpp"

#include <cstdint>

#include "segda/error.hpp"

namespace segda {
namespace {

constexpr std::array<double, kPyramidLevels> kLevelWeight{16.0, 4.0, 1.0};

std::size_t level_of(std::size_t cell) { return cell == 0 ? 0 : (cell <= 4 ? 1 : 2); }

void require_same_dims(const LabelMap& a, const LabelMap& b) {
  if (a.h != b.h || a.w != b.w) {
    fail(ErrorCode::kShapeMismatch, "label patches differ in size: " + std::to_string(a.w) + "x" +
                                        std::to_string(a.h) + " vs " + std::to_string(b.w) + "x" + std::to_string(b.h));
  }
}

}  // namespace

std::vector<double> semantic_vector(const LabelMap& patch, std::size_t num_classes) {
  std::vector<double> v(num_classes, 0.0);
  std::size_t annotated = 0;
  for (std::uint8_t c : patch.data) {
    if (c == kVoid) continue;
    if (c >= num_classes) fail(ErrorCode::kInvalidArgument, "label " + std::to_string(c) + " >= num_classes");
    v[c] += 1.0;
    ++annotated;
  }
  if (annotated) {
    for (double& x : v) x /= static_cast<double>(annotated);
  }
  return v;
}

PyramidDescriptors::PyramidDescriptors(const LabelMap& labels, const PatchGrid& grid, std::size_t num_classes)
    : patches_(grid.count()), num_classes_(num_classes), data_(grid.count() * kPyramidCells * num_classes, 0.0) {
  if (labels.h != grid.image_h() || labels.w != grid.image_w()) {
    fail(ErrorCode::kShapeMismatch, "label map " + std::to_string(labels.w) + "x" + std::to_string(labels.h) +
                                        " does not conform to the patch grid");
  }
  const std::size_t h = labels.h, w = labels.w, nc = num_classes;
  // integral[(y * (w + 1) + x) * nc + c] = count of class c in [0,y) x [0,x).
  std::vector<std::uint32_t> integral((h + 1) * (w + 1) * nc, 0);
  for (std::size_t y = 0; y < h; ++y) {
    std::vector<std::uint32_t> row(nc, 0);
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t c = labels.at(y, x);
      if (c != kVoid) {
        if (c >= nc) fail(ErrorCode::kInvalidArgument, "label " + std::to_string(c) + " >= num_classes");
        ++row[c];
      }
      const std::uint32_t* above = &integral[(y * (w + 1) + x + 1) * nc];
      std::uint32_t* dst = &integral[((y + 1) * (w + 1) + x + 1) * nc];
      for (std::size_t k = 0; k < nc; ++k) dst[k] = above[k] + row[k];
    }
  }
  auto count = [&](std::size_t y0, std::size_t x0, std::size_t y1, std::size_t x1, std::size_t c) {
    return static_cast<std::int64_t>(integral[(y1 * (w + 1) + x1) * nc + c]) -
           integral[(y0 * (w + 1) + x1) * nc + c] - integral[(y1 * (w + 1) + x0) * nc + c] +
           integral[(y0 * (w + 1) + x0) * nc + c];
  };

  for (std::size_t p = 0; p < patches_; ++p) {
    const Rect r = grid.image_rect(p);
    std::size_t cell = 0;
    for (std::size_t split : {1u, 2u, 4u}) {
      const std::size_t sh = r.h / split, sw = r.w / split;
      for (std::size_t i = 0; i < split; ++i) {
        for (std::size_t j = 0; j < split; ++j, ++cell) {
          const std::size_t y0 = r.y0 + i * sh, x0 = r.x0 + j * sw;
          double* v = &data_[(p * kPyramidCells + cell) * nc];
          std::int64_t total = 0;
          for (std::size_t c = 0; c < nc; ++c) {
            const std::int64_t n = count(y0, x0, y0 + sh, x0 + sw, c);
            v[c] = static_cast<double>(n);
            total += n;
          }
          if (total) {
            for (std::size_t c = 0; c < nc; ++c) v[c] /= static_cast<double>(total);
          }
        }
      }
    }
  }
}

DisparityBreakdown descriptor_disparity(const PyramidDescriptors& a, std::size_t pa, const PyramidDescriptors& b,
                                        std::size_t pb) {
  DisparityBreakdown out;
  const std::size_t nc = a.num_classes();
  for (std::size_t cell = 0; cell < kPyramidCells; ++cell) {
    const double* va = a.vector(pa, cell);
    const double* vb = b.vector(pb, cell);
    double sq = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const double d = va[c] - vb[c];
      sq += d * d;
    }
    out.weighted[level_of(cell)] += sq;
  }
  for (std::size_t m = 0; m < kPyramidLevels; ++m) {
    out.weighted[m] *= kLevelWeight[m];
    out.total += out.weighted[m];
  }
  return out;
}

DisparityBreakdown pyramid_disparity_detail(const LabelMap& a, const LabelMap& b, std::size_t num_classes) {
  require_same_dims(a, b);
  const PatchGrid whole(a.h, a.w, a.h, a.w);
  const PyramidDescriptors da(a, whole, num_classes), db(b, whole, num_classes);
  return descriptor_disparity(da, 0, db, 0);
}

double pyramid_disparity(const LabelMap& a, const LabelMap& b, std::size_t num_classes) {
  return pyramid_disparity_detail(a, b, num_classes).total;
}

double exact_disparity(const LabelMap& a, const LabelMap& b) {
  require_same_dims(a, b);
  std::size_t compared = 0, differing = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i] == kVoid && b.data[i] == kVoid) continue;
    ++compared;
    differing += a.data[i] != b.data[i];
  }
  return compared ? kMaxDisparity * static_cast<double>(differing) / static_cast<double>(compared) : 0.0;
}

DisparityMatrix disparity_matrix(const LabelMap& a, const LabelMap& b, const PatchGrid& grid,
                                 std::size_t num_classes, MatchingStrategy strategy) {
  for (const LabelMap* m : {&a, &b}) {
    if (m->h != grid.image_h() || m->w != grid.image_w()) {
      fail(ErrorCode::kShapeMismatch, "label map " + std::to_string(m->w) + "x" + std::to_string(m->h) +
                                          " does not conform to the patch grid");
    }
  }
  DisparityMatrix out{grid.count(), grid.count(), std::vector<double>(grid.count() * grid.count())};
  if (strategy == MatchingStrategy::kExact) {
    std::vector<LabelMap> pa, pb;
    for (std::size_t p = 0; p < grid.count(); ++p) {
      pa.push_back(a.crop(grid.image_rect(p)));
      pb.push_back(b.crop(grid.image_rect(p)));
    }
    for (std::size_t i = 0; i < grid.count(); ++i) {
      for (std::size_t j = 0; j < grid.count(); ++j) out.at(i, j) = exact_disparity(pa[i], pb[j]);
    }
    return out;
  }
  const PyramidDescriptors da(a, grid, num_classes), db(b, grid, num_classes);
  for (std::size_t i = 0; i < grid.count(); ++i) {
    for (std::size_t j = 0; j < grid.count(); ++j) out.at(i, j) = descriptor_disparity(da, i, db, j).total;
  }
  return out;
}

}  // namespace segda
