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

#include <chrono>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "segda/disparity.hpp"
#include "segda/error.hpp"

using namespace segda;

namespace {

LabelMap filled(std::size_t h, std::size_t w, std::uint8_t c) { return LabelMap(h, w, c); }

}  // namespace

TEST_CASE("semantic vectors") {
  LabelMap p(2, 2);
  p.data = {1, 1, 2, 3};
  CHECK(semantic_vector(p, 4) == std::vector<double>{0, 0.5, 0.25, 0.25});
  CHECK(semantic_vector(filled(4, 4, 2), 5) == std::vector<double>{0, 0, 1, 0, 0});
  LabelMap half(2, 4, 0);
  for (std::size_t y = 0; y < 2; ++y) half.at(y, 2) = half.at(y, 3) = kVoid;
  CHECK(semantic_vector(half, 5) == std::vector<double>{1, 0, 0, 0, 0});
  CHECK(semantic_vector(filled(4, 4, kVoid), 5) == std::vector<double>(5, 0.0));
}

TEST_CASE("anchor values") {
  const LabelMap a = filled(16, 32, 1);
  CHECK(pyramid_disparity(a, a, 5) == 0.0);
  CHECK(pyramid_disparity(a, filled(16, 32, 2), 5) == doctest::Approx(96.0).epsilon(1e-12));

  LabelMap split = a;
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 16; x < 32; ++x) split.at(y, x) = 2;
  }
  const DisparityBreakdown d = pyramid_disparity_detail(a, split, 5);
  CHECK(d.total == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(d.weighted[0] == doctest::Approx(8.0).epsilon(1e-12));   // 16 * 0.5
  CHECK(d.weighted[1] == doctest::Approx(16.0).epsilon(1e-12));  // 4 * (2 quadrants * 2)
  CHECK(d.weighted[2] == doctest::Approx(16.0).epsilon(1e-12));  // 1 * (8 cells * 2)
  CHECK(d.total == doctest::Approx(oracle::pyramid(a, split, 5)).epsilon(1e-12));

  // Each level's maximum contribution is 32.
  const DisparityBreakdown m = pyramid_disparity_detail(a, filled(16, 32, 4), 5);
  for (double lv : m.weighted) CHECK(lv == doctest::Approx(32.0).epsilon(1e-12));

  CHECK_THROWS_AS(pyramid_disparity(a, filled(16, 16, 1), 5), Error);
  CHECK_THROWS_AS(pyramid_disparity(filled(6, 8, 1), filled(6, 8, 1), 5), Error);
}

TEST_CASE("pyramid disparity matches the naive oracle, is symmetric and bounded") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 300; ++t) {
    const double void_rate = (t % 4) * 0.2;
    const LabelMap a = oracle::random_labels(rng, 16, 32, 5, void_rate);
    // Mix of independent and correlated pairs so small disparities appear too.
    LabelMap b = t % 2 ? oracle::random_labels(rng, 16, 32, 5, void_rate) : a;
    if (t % 2 == 0) {
      for (int k = 0; k < 20; ++k) b.data[rng() % b.data.size()] = static_cast<std::uint8_t>(rng() % 5);
    }
    const double d = pyramid_disparity(a, b, 5);
    CHECK(std::abs(d - oracle::pyramid(a, b, 5)) < 1e-9);
    CHECK(d == pyramid_disparity(b, a, 5));
    CHECK(d >= 0.0);
    CHECK(d <= 96.0 + 1e-12);
  }
}

TEST_CASE("single-class patches: void sub-patches give zero vectors") {
  LabelMap a = filled(8, 8, 0);
  LabelMap b = a;
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t x = 0; x < 2; ++x) b.at(y, x) = kVoid;  // one level-2 cell fully VOID
  }
  // Only that cell differs: ||[1,0..] - 0||^2 = 1 at weight 1.
  CHECK(pyramid_disparity(a, b, 5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pyramid_disparity(a, b, 5) == doctest::Approx(oracle::pyramid(a, b, 5)).epsilon(1e-12));
}

TEST_CASE("disparity matrix equals per-patch recomputation") {
  std::mt19937_64 rng(7);
  const PatchGrid grid(32, 64, 8, 16);
  for (int t = 0; t < 5; ++t) {
    const LabelMap a = oracle::random_labels(rng, 32, 64, 5, 0.1 * t);
    const LabelMap b = oracle::random_labels(rng, 32, 64, 5, 0.05 * t);
    const DisparityMatrix m = disparity_matrix(a, b, grid, 5);
    REQUIRE(m.rows == 16);
    REQUIRE(m.cols == 16);
    double worst = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j < 16; ++j) {
        const double ref = oracle::pyramid(a.crop(grid.image_rect(i)), b.crop(grid.image_rect(j)), 5);
        worst = std::max(worst, std::abs(m.at(i, j) - ref));
        CHECK(m.at(i, j) >= 0.0);
        CHECK(m.at(i, j) <= 96.0 + 1e-12);
      }
    }
    CHECK(worst < 1e-9);
    const DisparityMatrix self = disparity_matrix(a, a, grid, 5);
    for (std::size_t i = 0; i < 16; ++i) CHECK(self.at(i, i) == 0.0);
  }
  CHECK_THROWS_AS(disparity_matrix(LabelMap(32, 60), LabelMap(32, 64), grid, 5), Error);
}

TEST_CASE("exact matching") {
  const LabelMap a = filled(4, 8, 1);
  LabelMap b = a;
  for (std::size_t x = 0; x < 8; ++x) b.at(0, x) = 2;  // a quarter of the pixels
  CHECK(exact_disparity(a, a) == 0.0);
  CHECK(exact_disparity(a, b) == doctest::Approx(24.0));
  CHECK(exact_disparity(a, filled(4, 8, 3)) == doctest::Approx(96.0));
  LabelMap va = a, vb = b;
  for (std::size_t x = 0; x < 8; ++x) va.at(0, x) = vb.at(0, x) = kVoid;
  CHECK(exact_disparity(va, vb) == 0.0);  // VOID in both: ignored
  const PatchGrid grid(4, 8, 4, 8);
  CHECK(disparity_matrix(a, b, grid, 5, MatchingStrategy::kExact).at(0, 0) == doctest::Approx(24.0));
}
