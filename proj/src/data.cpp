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

#include "segda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "segda/error.hpp"
#include "segda/image_io.hpp"
#include "segda/rng.hpp"

namespace segda {
namespace fs = std::filesystem;

namespace {

enum SceneClass : std::uint8_t { kBackground = 0, kDisk = 1, kRectangle = 2, kTriangle = 3, kStripe = 4 };

std::uint64_t style_stream(Domain d) { return d == Domain::kSource ? 11 : 12; }

}  // namespace

std::string StyleConfig::describe() const {
  std::ostringstream os;
  os.precision(6);
  os << "palette=";
  for (std::size_t c = 0; c < palette.size(); ++c) {
    if (c) os << ';';
    os << palette[c][0] << ' ' << palette[c][1] << ' ' << palette[c][2];
  }
  os << " color_jitter=" << color_jitter << " noise_sigma=" << noise_sigma << " illumination=" << illumination
     << " texture_freq=" << texture_freq << " texture_amp=" << texture_amp;
  return os.str();
}

StyleConfig source_style() {
  StyleConfig s;
  s.palette = {{{0.45, 0.45, 0.45}, {0.85, 0.25, 0.25}, {0.25, 0.40, 0.85}, {0.90, 0.75, 0.20}, {0.30, 0.75, 0.35}}};
  s.color_jitter = 0.03;
  s.noise_sigma = 0.02;
  s.illumination = 0.0;
  s.texture_freq = 0.15;
  s.texture_amp = 0.05;
  return s;
}

StyleConfig target_style() {
  StyleConfig s;
  s.palette = {{{0.30, 0.34, 0.42}, {0.62, 0.30, 0.42}, {0.22, 0.38, 0.62}, {0.64, 0.62, 0.40}, {0.30, 0.56, 0.48}}};
  s.color_jitter = 0.06;
  s.noise_sigma = 0.08;
  s.illumination = 0.35;
  s.texture_freq = 0.15;
  s.texture_amp = 0.05;
  return s;
}

LabelMap generate_layout(std::uint64_t seed, std::size_t h, std::size_t w) {
  Rng rng(mix_seed(seed, 1));
  LabelMap labels(h, w, kBackground);
  const double W = static_cast<double>(w), H = static_cast<double>(h);
  const auto shapes = rng.range(2, 6);
  for (std::int64_t s = 0; s < shapes; ++s) {
    const auto cls = static_cast<std::uint8_t>(rng.range(kDisk, kStripe));
    switch (cls) {
      case kDisk: {
        const double cx = rng.uniform(0, W), cy = rng.uniform(0, H), r = rng.uniform(18, 34);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= r * r) labels.at(y, x) = cls;
          }
        }
        break;
      }
      case kRectangle: {
        const double rw = rng.uniform(40, 100), rh = rng.uniform(28, 60);
        const double x0 = rng.uniform(-rw / 2, W - rw / 2), y0 = rng.uniform(-rh / 2, H - rh / 2);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            if (px >= x0 && px < x0 + rw && py >= y0 && py < y0 + rh) labels.at(y, x) = cls;
          }
        }
        break;
      }
      case kTriangle: {
        const double base = rng.uniform(60, 120), height = rng.uniform(40, 64);
        const double cx = rng.uniform(0, W), by = rng.uniform(height / 2, H + height / 4);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double t = (by - py) / height;  // 0 at the base, 1 at the apex
            if (t < 0 || t > 1) continue;
            if (std::abs(px - cx) <= (1 - t) * base / 2) labels.at(y, x) = cls;
          }
        }
        break;
      }
      default: {
        const double thick = rng.uniform(16, 28), len = rng.uniform(40, W);
        const double x0 = rng.uniform(-len / 4, W - 3 * len / 4), y0 = rng.uniform(0, H);
        const double slope = rng.uniform(-0.25, 0.25);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            if (px < x0 || px > x0 + len) continue;
            if (std::abs(py - (y0 + slope * (px - x0))) <= thick / 2) labels.at(y, x) = cls;
          }
        }
        break;
      }
    }
  }
  return labels;
}

Scene generate_scene(std::uint64_t seed, const StyleConfig& style, Domain domain, std::size_t h, std::size_t w) {
  Scene scene;
  scene.labels = generate_layout(seed, h, w);
  scene.domain = domain;
  scene.id = std::string(domain_name(domain)) + "_" + std::to_string(seed);

  Rng rng(mix_seed(seed, style_stream(domain)));
  std::array<std::array<double, 3>, kSceneClasses> colors = style.palette;
  for (auto& rgb : colors) {
    for (double& v : rgb) v += rng.uniform(-style.color_jitter, style.color_jitter);
  }
  std::array<double, kSceneClasses> phase{};
  for (double& p : phase) p = rng.uniform(0, 2 * std::numbers::pi);
  const double light_angle = rng.uniform(0, 2 * std::numbers::pi);
  const double lx = std::cos(light_angle), ly = std::sin(light_angle);

  scene.image = Tensor({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t c = scene.labels.at(y, x);
      const double theta = std::numbers::pi * c / kSceneClasses;
      const double texture =
          style.texture_amp *
          std::sin(2 * std::numbers::pi * style.texture_freq * (x * std::cos(theta) + y * std::sin(theta)) + phase[c]);
      const double ramp = style.illumination * ((x + 0.5) / w - 0.5) * lx + style.illumination * ((y + 0.5) / h - 0.5) * ly;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = colors[c][ch] + texture + ramp + style.noise_sigma * rng.normal();
        scene.image.at(ch, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return scene;
}

LabelMap partial_annotation(const LabelMap& labels, double fraction, std::uint64_t seed, std::size_t block) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorCode::kInvalidArgument, "annotation fraction must lie in (0, 1]");
  if (block == 0) fail(ErrorCode::kInvalidArgument, "annotation block size must be positive");
  const std::size_t by = (labels.h + block - 1) / block, bx = (labels.w + block - 1) / block;
  const std::size_t blocks = by * bx;
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(blocks) - 1e-9));
  std::vector<std::size_t> all(blocks);
  for (std::size_t i = 0; i < blocks; ++i) all[i] = i;
  Rng rng(seed);
  std::vector<bool> kept(blocks, false);
  for (std::size_t b : rng.sample(all, keep)) kept[b] = true;

  LabelMap out = labels;
  for (std::size_t y = 0; y < labels.h; ++y) {
    for (std::size_t x = 0; x < labels.w; ++x) {
      if (!kept[(y / block) * bx + x / block]) out.at(y, x) = kVoid;
    }
  }
  return out;
}

std::vector<Scene> load_dataset(const std::string& image_dir, const std::string& label_dir,
                                std::size_t num_classes, Domain domain) {
  auto list_pngs = [](const std::string& dir) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(dir)) fail(ErrorCode::kIo, dir + ": not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") out[entry.path().stem().string()] = entry.path();
    }
    return out;
  };
  const auto images = list_pngs(image_dir);
  const auto labels = list_pngs(label_dir);
  for (const auto& [stem, path] : labels) {
    if (!images.count(stem)) fail(ErrorCode::kFormat, path.string() + ": no matching image");
  }

  std::vector<Scene> scenes;
  for (const auto& [stem, path] : images) {
    auto it = labels.find(stem);
    if (it == labels.end()) fail(ErrorCode::kFormat, path.string() + ": no matching label map");
    Scene s;
    s.image = read_rgb_png(path.string());
    s.labels = read_label_png(it->second.string());
    if (s.labels.h != s.image.dim(1) || s.labels.w != s.image.dim(2)) {
      fail(ErrorCode::kFormat, it->second.string() + ": label size differs from its image");
    }
    s.labels.validate(num_classes, it->second.string());
    s.domain = domain;
    s.id = stem;
    scenes.push_back(std::move(s));
  }
  return scenes;
}

void write_dataset(const std::string& dir, const std::vector<Scene>& scenes) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "labels");
  for (const Scene& s : scenes) {
    write_rgb_png((fs::path(dir) / "images" / (s.id + ".png")).string(), s.image);
    write_label_png((fs::path(dir) / "labels" / (s.id + ".png")).string(), s.labels);
  }
}

SsdaSplit split_ssda(std::vector<Scene> source, std::vector<Scene> target, std::size_t num_labeled,
                     std::uint64_t seed) {
  if (num_labeled > target.size()) {
    fail(ErrorCode::kInvalidArgument, "requested " + std::to_string(num_labeled) + " labeled target scenes but only " +
                                          std::to_string(target.size()) + " exist");
  }
  std::vector<std::size_t> order(target.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  std::vector<std::size_t> chosen = rng.sample(order, num_labeled);
  std::sort(chosen.begin(), chosen.end());
  std::vector<bool> is_labeled(target.size(), false);
  for (std::size_t i : chosen) is_labeled[i] = true;

  SsdaSplit split;
  split.source = std::move(source);
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (is_labeled[i]) {
      split.labeled.push_back(std::move(target[i]));
    } else {
      split.unlabeled.push_back({std::move(target[i].image), target[i].id});
      split.hidden_.push_back(std::move(target[i].labels));
    }
  }
  return split;
}

Benchmark generate_benchmark(const BenchmarkSpec& spec) {
  Benchmark b;
  const StyleConfig src = source_style(), tgt = target_style();
  // Zero-padded ids keep directory order equal to generation order.
  auto make = [&](std::vector<Scene>& out, const char* prefix, std::uint64_t stream, std::size_t n,
                  const StyleConfig& style, Domain domain) {
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(generate_scene(mix_seed(spec.seed, stream + i), style, domain, spec.h, spec.w));
      char id[32];
      std::snprintf(id, sizeof id, "%s_%04zu", prefix, i);
      out.back().id = id;
    }
  };
  make(b.source, "source", 100000, spec.num_source, src, Domain::kSource);
  make(b.target, "target", 200000, spec.num_target, tgt, Domain::kTarget);
  make(b.val, "val", 300000, spec.num_val, tgt, Domain::kTarget);
  return b;
}

}  // namespace segda
