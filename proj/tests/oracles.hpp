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

// Straightforward reference implementations used as test oracles. They share
// no code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "segda/autodiff.hpp"
#include "segda/labels.hpp"
#include "segda/tensor.hpp"

namespace oracle {

inline std::vector<double> histogram(const segda::LabelMap& m, std::size_t y0, std::size_t x0, std::size_t h,
                                     std::size_t w, std::size_t nc) {
  std::vector<double> v(nc, 0.0);
  double n = 0;
  for (std::size_t y = y0; y < y0 + h; ++y) {
    for (std::size_t x = x0; x < x0 + w; ++x) {
      const auto c = m.at(y, x);
      if (c == segda::kVoid) continue;
      v[c] += 1;
      n += 1;
    }
  }
  if (n > 0) {
    for (double& e : v) e /= n;
  }
  return v;
}

/// Three-level pyramid: every sub-patch histogram is recounted from pixels.
inline double pyramid(const segda::LabelMap& a, const segda::LabelMap& b, std::size_t nc) {
  const std::size_t splits[3] = {1, 2, 4};
  const double weights[3] = {16, 4, 1};
  double total = 0;
  for (int level = 0; level < 3; ++level) {
    const std::size_t s = splits[level];
    const std::size_t sh = a.h / s, sw = a.w / s;
    double part = 0;
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j < s; ++j) {
        const auto va = histogram(a, i * sh, j * sw, sh, sw, nc);
        const auto vb = histogram(b, i * sh, j * sw, sh, sw, nc);
        for (std::size_t c = 0; c < nc; ++c) part += (va[c] - vb[c]) * (va[c] - vb[c]);
      }
    }
    total += weights[level] * part;
  }
  return total;
}

/// O(N^2) two-dimensional DFT, unnormalized forward transform.
inline std::vector<std::complex<double>> dft2(const std::vector<double>& x, std::size_t h, std::size_t w) {
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t xx = 0; xx < w; ++xx) {
          const double ang = -2 * std::numbers::pi * (double(u * y) / h + double(v * xx) / w);
          acc += x[y * w + xx] * std::polar(1.0, ang);
        }
      }
      out[u * w + v] = acc;
    }
  }
  return out;
}

inline segda::LabelMap random_labels(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t nc,
                                     double void_rate) {
  segda::LabelMap m(h, w);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : m.data) {
    v = u(rng) < void_rate ? segda::kVoid : static_cast<std::uint8_t>(rng() % nc);
  }
  return m;
}

inline segda::Tensor random_tensor(std::mt19937_64& rng, const segda::Shape& shape, double lo = -1, double hi = 1) {
  segda::Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// Central differences over every coordinate of every parameter leaf,
/// evaluated with the forward pass only. Returns the max relative error
/// |a - n| / max(1, |a|, |n|) against `analytic`.
inline double fd_error(const segda::ad::Graph& g, const segda::ad::Bindings& bindings,
                       const std::map<std::string, segda::Tensor>& analytic, double eps = 1e-5) {
  const auto out = *g.output();
  segda::ad::Bindings probe = bindings;
  double worst = 0;
  for (const auto& [name, grad] : analytic) {
    segda::Tensor& leaf = probe.at(name);
    for (std::size_t i = 0; i < leaf.size(); ++i) {
      const double saved = leaf[i];
      leaf[i] = saved + eps;
      const double up = segda::ad::forward(g, probe)[out][0];
      leaf[i] = saved - eps;
      const double down = segda::ad::forward(g, probe)[out][0];
      leaf[i] = saved;
      const double n = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(grad[i] - n) / std::max({1.0, std::abs(grad[i]), std::abs(n)}));
    }
  }
  return worst;
}

}  // namespace oracle
