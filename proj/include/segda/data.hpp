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

// Synthetic two-domain scenes, dataset directories, SSDA splits and
// block-wise partial annotation.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segda/labels.hpp"
#include "segda/tensor.hpp"

namespace segda {

inline constexpr std::size_t kSceneClasses = 5;  // background, disk, rectangle, triangle, stripe

struct StyleConfig {
  std::array<std::array<double, 3>, kSceneClasses> palette{};
  // Per-image random offset added to every class color, per channel.
  double color_jitter = 0.0;
  double noise_sigma = 0.0;
  // Peak-to-peak amplitude of a random linear illumination ramp.
  double illumination = 0.0;
  double texture_freq = 0.0;  // cycles per pixel
  double texture_amp = 0.0;

  std::string describe() const;
};

StyleConfig source_style();
StyleConfig target_style();

struct Scene {
  Tensor image;     // [3, H, W] in [0, 1]
  LabelMap labels;
  Domain domain = Domain::kSource;
  std::string id;
};

/// Class layout of a scene; depends on the seed only.
LabelMap generate_layout(std::uint64_t seed, std::size_t h, std::size_t w);
Scene generate_scene(std::uint64_t seed, const StyleConfig& style, Domain domain, std::size_t h = 64,
                     std::size_t w = 128);

/// Keeps ceil(fraction * blocks) seeded 10x10 blocks (ragged at the right and
/// bottom edges) and sets every other pixel to VOID.
LabelMap partial_annotation(const LabelMap& labels, double fraction, std::uint64_t seed, std::size_t block = 10);

/// Scenes from <image_dir>/<stem>.png and <label_dir>/<stem>.png, sorted by stem.
std::vector<Scene> load_dataset(const std::string& image_dir, const std::string& label_dir,
                                std::size_t num_classes, Domain domain);
void write_dataset(const std::string& dir, const std::vector<Scene>& scenes);

struct UnlabeledScene {
  Tensor image;
  std::string id;
};

class SsdaSplit {
 public:
  std::vector<Scene> source;
  std::vector<Scene> labeled;
  std::vector<UnlabeledScene> unlabeled;

  /// Ground truth of `unlabeled`, index-aligned. Evaluation only.
  const std::vector<LabelMap>& sequestered_labels() const { return hidden_; }

 private:
  friend SsdaSplit split_ssda(std::vector<Scene>, std::vector<Scene>, std::size_t, std::uint64_t);
  std::vector<LabelMap> hidden_;
};

/// Seeded choice of num_labeled target scenes; the rest lose their labels.
SsdaSplit split_ssda(std::vector<Scene> source, std::vector<Scene> target, std::size_t num_labeled,
                     std::uint64_t seed);

struct BenchmarkSpec {
  std::size_t num_source = 200;
  std::size_t num_target = 100;
  std::size_t num_val = 50;
  std::size_t h = 64;
  std::size_t w = 128;
  std::uint64_t seed = 20240601;
};

struct Benchmark {
  std::vector<Scene> source;
  std::vector<Scene> target;
  std::vector<Scene> val;  // held-out target-style scenes
};

Benchmark generate_benchmark(const BenchmarkSpec& spec);

}  // namespace segda
