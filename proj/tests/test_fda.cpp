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

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "segda/error.hpp"
#include "segda/fda.hpp"

using namespace segda;

namespace {

std::vector<double> channel(const Tensor& t, std::size_t c) {
  const std::size_t n = t.dim(1) * t.dim(2);
  return {t.values().begin() + c * n, t.values().begin() + (c + 1) * n};
}

}  // namespace

TEST_CASE("constant image has a DC-only spectrum") {
  const std::vector<double> x(6 * 10, 0.3);
  const Spectrum s = dft2(x, 6, 10);
  CHECK(std::abs(s.at(0, 0) - std::complex<double>(0.3 * 60, 0)) < 1e-12);
  double rest = 0;
  for (std::size_t i = 1; i < s.bins.size(); ++i) rest = std::max(rest, std::abs(s.bins[i]));
  CHECK(rest < 1e-12);
}

TEST_CASE("transform agrees with the naive DFT and inverts") {
  std::mt19937_64 rng(1);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {5, 7}, {6, 12}, {1, 9}}) {
    const Tensor t = oracle::random_tensor(rng, {1, h, w}, 0, 1);
    const auto x = channel(t, 0);
    const Spectrum s = dft2(x, h, w);
    const auto ref = oracle::dft2(x, h, w);
    double diff = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) diff = std::max(diff, std::abs(ref[i] - s.bins[i]));
    CHECK(diff < 1e-9);

    // Hermitian symmetry of a real signal.
    double herm = 0;
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        herm = std::max(herm, std::abs(s.at(u, v) - std::conj(s.at((h - u) % h, (w - v) % w))));
      }
    }
    CHECK(herm < 1e-9);

    // Parseval: sum |x|^2 = sum |X|^2 / (HW).
    double ex = 0, es = 0;
    for (double v : x) ex += v * v;
    for (const auto& b : s.bins) es += std::norm(b);
    CHECK(std::abs(ex - es / double(h * w)) / ex < 1e-6);

    const auto back = idft2(s);
    double rt = 0;
    for (std::size_t i = 0; i < x.size(); ++i) rt = std::max(rt, std::abs(back[i] - x[i]));
    CHECK(rt < 1e-9);
  }
}

TEST_CASE("round trip on a full-size image") {
  std::mt19937_64 rng(2);
  const Tensor t = oracle::random_tensor(rng, {1, 64, 128}, 0, 1);
  const auto x = channel(t, 0);
  const auto back = idft2(dft2(x, 64, 128));
  double rt = 0;
  for (std::size_t i = 0; i < x.size(); ++i) rt = std::max(rt, std::abs(back[i] - x[i]));
  CHECK(rt < 1e-9);
}

TEST_CASE("window geometry") {
  CHECK(fda_half_width(64, 128, 0.05) == 3);
  CHECK(fda_half_width(8, 8, 0.5) == 4);
  CHECK(fda_half_width(64, 128, 0.0) == 0);
  CHECK_FALSE(in_fda_window(0, 0, 64, 128, 0.0));
  CHECK(in_fda_window(0, 0, 64, 128, 0.01));  // b = 0: DC bin only
  CHECK_FALSE(in_fda_window(0, 1, 64, 128, 0.01));
  // b = 3: offsets -3..3 around DC in both axes, wrapping in natural order.
  std::size_t count = 0;
  for (std::size_t u = 0; u < 64; ++u) {
    for (std::size_t v = 0; v < 128; ++v) count += in_fda_window(u, v, 64, 128, 0.05);
  }
  CHECK(count == 49);
  CHECK(in_fda_window(61, 125, 64, 128, 0.05));
  CHECK_FALSE(in_fda_window(60, 0, 64, 128, 0.05));
}

TEST_CASE("translation identities") {
  std::mt19937_64 rng(3);
  const Tensor src = oracle::random_tensor(rng, {3, 64, 128}, 0, 1);
  const Tensor tgt = oracle::random_tensor(rng, {3, 64, 128}, 0, 1);
  CHECK(max_abs_diff(fda_translate_raw(src, tgt, 0.0), src) < 1e-6);
  CHECK(max_abs_diff(fda_translate(src, src, 0.05), src) < 1e-6);
  CHECK(max_abs_diff(fda_translate(src, src, 0.5), src) < 1e-6);
  const Tensor out = fda_translate(src, tgt, 0.1);
  for (double v : out.values()) REQUIRE((v >= 0.0 && v <= 1.0));
  CHECK(fda_translate(src, tgt, 0.1) == out);
  CHECK_THROWS_AS(fda_translate(src, oracle::random_tensor(rng, {3, 64, 64}, 0, 1), 0.05), Error);
  CHECK_THROWS_AS(fda_translate(src, tgt, 0.6), Error);
  CHECK_THROWS_AS(fda_translate(src, tgt, -0.1), Error);
}

TEST_CASE("full window: target amplitude with source phase") {
  std::mt19937_64 rng(4);
  const Tensor src = oracle::random_tensor(rng, {1, 8, 8}, 0, 1);
  const Tensor tgt = oracle::random_tensor(rng, {1, 8, 8}, 0, 1);
  const Tensor out = fda_translate_raw(src, tgt, 0.5);
  const auto so = oracle::dft2(channel(out, 0), 8, 8);
  const auto ss = oracle::dft2(channel(src, 0), 8, 8);
  const auto st = oracle::dft2(channel(tgt, 0), 8, 8);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(std::abs(std::abs(so[i]) - std::abs(st[i])) < 1e-9);
    if (std::abs(ss[i]) > 1e-3 && std::abs(so[i]) > 1e-3) {
      CHECK(std::abs(std::remainder(std::arg(so[i]) - std::arg(ss[i]), 2 * std::numbers::pi)) < 1e-6);
    }
  }
}

TEST_CASE("phase is preserved at every bin for partial windows") {
  std::mt19937_64 rng(5);
  const Tensor src = oracle::random_tensor(rng, {3, 16, 32}, 0, 1);
  const Tensor tgt = oracle::random_tensor(rng, {3, 16, 32}, 0, 1);
  const Tensor out = fda_translate_raw(src, tgt, 0.15);
  for (std::size_t c = 0; c < 3; ++c) {
    const Spectrum so = dft2(channel(out, c), 16, 32);
    const Spectrum ss = dft2(channel(src, c), 16, 32);
    const Spectrum st = dft2(channel(tgt, c), 16, 32);
    for (std::size_t u = 0; u < 16; ++u) {
      for (std::size_t v = 0; v < 32; ++v) {
        if (ss.amplitude(u, v) < 1e-3) continue;  // ill-conditioned phase
        CHECK(std::abs(std::remainder(so.phase(u, v) - ss.phase(u, v), 2 * std::numbers::pi)) < 1e-6);
        const double want = in_fda_window(u, v, 16, 32, 0.15) ? st.amplitude(u, v) : ss.amplitude(u, v);
        CHECK(std::abs(so.amplitude(u, v) - want) < 1e-9);
      }
    }
  }
}

TEST_CASE("channel means move toward the target as the window grows") {
  const Tensor src({3, 32, 64}, 0.2);
  const Tensor tgt({3, 32, 64}, 0.8);
  double previous = 1e9;
  for (double ratio : {0.0, 0.05, 0.15}) {
    const Tensor out = fda_translate(src, tgt, ratio);
    double mean = 0;
    for (double v : out.values()) mean += v;
    mean /= static_cast<double>(out.size());
    const double gap = std::abs(mean - 0.8);
    CHECK(gap <= previous + 1e-12);
    if (ratio > 0) CHECK(gap < 1e-9);
    previous = gap;
  }
}
