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

// Fourier-domain style transfer: the low-frequency amplitude of a source image
// is replaced by a target image's while the source phase is kept.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "segda/tensor.hpp"

namespace segda {

/// Unnormalized 2-D DFT of one H x W channel, natural (unshifted) bin order.
struct Spectrum {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::complex<double>> bins;

  const std::complex<double>& at(std::size_t u, std::size_t v) const { return bins[u * w + v]; }
  std::complex<double>& at(std::size_t u, std::size_t v) { return bins[u * w + v]; }
  double amplitude(std::size_t u, std::size_t v) const { return std::abs(at(u, v)); }
  double phase(std::size_t u, std::size_t v) const { return std::arg(at(u, v)); }
};

Spectrum dft2(std::span<const double> channel, std::size_t h, std::size_t w);
/// Inverse transform (with the 1/(HW) factor); returns the real part.
std::vector<double> idft2(const Spectrum& spectrum);

/// Half-width b of the swapped square (side 2b+1 around the zero frequency).
std::size_t fda_half_width(std::size_t h, std::size_t w, double window_ratio);

/// Whether bin (u, v) lies in the swapped window. A ratio of 0 swaps nothing.
bool in_fda_window(std::size_t u, std::size_t v, std::size_t h, std::size_t w, double window_ratio);

/// Per-channel amplitude swap without the final clamp.
Tensor fda_translate_raw(const Tensor& source, const Tensor& target, double window_ratio);

/// fda_translate_raw clamped to [0, 1].
Tensor fda_translate(const Tensor& source, const Tensor& target, double window_ratio);

}  // namespace segda
