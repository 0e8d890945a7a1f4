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

#include "segda/fda.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "segda/error.hpp"

namespace segda {
namespace {

// FFTW_ESTIMATE plans are deterministic; FFTW_MEASURE could pick a different
// algorithm per process and break bit-reproducible runs.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t h, std::size_t w, int sign) {
    std::lock_guard lock(mu_);
    const auto key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_complex* in = fftw_alloc_complex(h * w);
    fftw_complex* out = fftw_alloc_complex(h * w);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in, out, sign, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

void check_image(const Tensor& t, const char* what) {
  if (t.rank() != 3) fail(ErrorCode::kShapeMismatch, std::string("fda: ") + what + " must be [C,H,W]");
}

}  // namespace

Spectrum dft2(std::span<const double> channel, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0 || channel.size() != h * w) fail(ErrorCode::kShapeMismatch, "dft2: bad channel size");
  FftwBuffer in(h * w), out(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    in.ptr[i][0] = channel[i];
    in.ptr[i][1] = 0.0;
  }
  fftw_execute_dft(plans().get(h, w, FFTW_FORWARD), in.ptr, out.ptr);
  Spectrum s{h, w, std::vector<std::complex<double>>(h * w)};
  for (std::size_t i = 0; i < h * w; ++i) s.bins[i] = {out.ptr[i][0], out.ptr[i][1]};
  return s;
}

std::vector<double> idft2(const Spectrum& s) {
  const std::size_t n = s.h * s.w;
  if (n == 0 || s.bins.size() != n) fail(ErrorCode::kShapeMismatch, "idft2: bad spectrum size");
  FftwBuffer in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    in.ptr[i][0] = s.bins[i].real();
    in.ptr[i][1] = s.bins[i].imag();
  }
  fftw_execute_dft(plans().get(s.h, s.w, FFTW_BACKWARD), in.ptr, out.ptr);
  std::vector<double> x(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = out.ptr[i][0] * inv;
  return x;
}

std::size_t fda_half_width(std::size_t h, std::size_t w, double window_ratio) {
  return static_cast<std::size_t>(std::floor(window_ratio * static_cast<double>(std::min(h, w))));
}

bool in_fda_window(std::size_t u, std::size_t v, std::size_t h, std::size_t w, double window_ratio) {
  if (window_ratio <= 0.0) return false;
  const auto b = static_cast<std::ptrdiff_t>(fda_half_width(h, w, window_ratio));
  // Signed offset of bin u from the zero frequency after centering, where
  // the centered index of zero frequency is floor(n/2).
  auto inside = [b](std::size_t idx, std::size_t n) {
    const auto c = static_cast<std::ptrdiff_t>(n / 2);
    auto d = static_cast<std::ptrdiff_t>(idx);
    if (d > static_cast<std::ptrdiff_t>(n) - 1 - c) d -= static_cast<std::ptrdiff_t>(n);
    return d >= -b && d <= b;
  };
  return inside(u, h) && inside(v, w);
}

Tensor fda_translate_raw(const Tensor& source, const Tensor& target, double window_ratio) {
  check_image(source, "source");
  check_image(target, "target");
  if (source.shape() != target.shape()) {
    fail(ErrorCode::kShapeMismatch, "fda: source " + shape_string(source.shape()) + " and target " +
                                        shape_string(target.shape()) + " differ in size");
  }
  if (!(window_ratio >= 0.0 && window_ratio <= 0.5)) {
    fail(ErrorCode::kInvalidArgument, "fda: window ratio must lie in [0, 0.5]");
  }
  const std::size_t c_n = source.dim(0), h = source.dim(1), w = source.dim(2);
  Tensor out(source.shape());
  if (window_ratio == 0.0) {
    std::copy(source.data().begin(), source.data().end(), out.data().begin());
    return out;
  }
  for (std::size_t c = 0; c < c_n; ++c) {
    Spectrum s = dft2(source.data().subspan(c * h * w, h * w), h, w);
    const Spectrum t = dft2(target.data().subspan(c * h * w, h * w), h, w);
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        if (!in_fda_window(u, v, h, w, window_ratio)) continue;
        s.at(u, v) = std::polar(t.amplitude(u, v), s.phase(u, v));
      }
    }
    const std::vector<double> x = idft2(s);
    std::copy(x.begin(), x.end(), out.data().begin() + static_cast<std::ptrdiff_t>(c * h * w));
  }
  return out;
}

Tensor fda_translate(const Tensor& source, const Tensor& target, double window_ratio) {
  Tensor out = fda_translate_raw(source, target, window_ratio);
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace segda
