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

#include "segda/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "segda/error.hpp"

namespace segda {
namespace {

struct PngImage {
  png_image image;
  PngImage() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
};

std::vector<std::uint8_t> read_png(const std::string& path, png_uint_32 format, bool require_gray,
                                   std::size_t& h, std::size_t& w) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
    fail(ErrorCode::kIo, path + ": cannot read PNG (" + png.image.message + ")");
  }
  if (require_gray && (png.image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_COLORMAP))) {
    fail(ErrorCode::kFormat, path + ": label PNG must be single-channel 8-bit");
  }
  if (require_gray && (png.image.format & PNG_FORMAT_FLAG_LINEAR)) {
    fail(ErrorCode::kFormat, path + ": label PNG must be 8-bit, not 16-bit");
  }
  png.image.format = format;
  h = png.image.height;
  w = png.image.width;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, buf.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, path + ": cannot decode PNG (" + png.image.message + ")");
  }
  return buf;
}

void write_png(const std::string& path, png_uint_32 format, std::size_t h, std::size_t w,
               const std::vector<std::uint8_t>& buf) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(w);
  png.image.height = static_cast<png_uint_32>(h);
  png.image.format = format;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, path + ": cannot write PNG (" + png.image.message + ")");
  }
}

constexpr std::array<std::array<std::uint8_t, 3>, 8> kLabelColors{{
    {128, 128, 128},
    {220, 20, 60},
    {70, 130, 180},
    {250, 170, 30},
    {107, 142, 35},
    {152, 251, 152},
    {255, 0, 255},
    {0, 255, 255},
}};

}  // namespace

Tensor read_rgb_png(const std::string& path) {
  std::size_t h = 0, w = 0;
  const auto buf = read_png(path, PNG_FORMAT_RGB, false, h, w);
  Tensor t({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) t.at(c, y, x) = buf[(y * w + x) * 3 + c] / 255.0;
    }
  }
  return t;
}

void write_rgb_png(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) fail(ErrorCode::kShapeMismatch, "write_rgb_png: image must be [3,H,W]");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> buf(h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        buf[(y * w + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  write_png(path, PNG_FORMAT_RGB, h, w, buf);
}

LabelMap read_label_png(const std::string& path) {
  std::size_t h = 0, w = 0;
  auto buf = read_png(path, PNG_FORMAT_GRAY, true, h, w);
  LabelMap m;
  m.h = h;
  m.w = w;
  m.data = std::move(buf);
  return m;
}

void write_label_png(const std::string& path, const LabelMap& labels) {
  write_png(path, PNG_FORMAT_GRAY, labels.h, labels.w, labels.data);
}

void write_color_label_png(const std::string& path, const LabelMap& labels) {
  std::vector<std::uint8_t> buf(labels.size() * 3, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint8_t c = labels.data[i];
    if (c == kVoid) continue;
    const auto& rgb = kLabelColors[c % kLabelColors.size()];
    std::copy(rgb.begin(), rgb.end(), buf.begin() + static_cast<std::ptrdiff_t>(i * 3));
  }
  write_png(path, PNG_FORMAT_RGB, labels.h, labels.w, buf);
}

}  // namespace segda
