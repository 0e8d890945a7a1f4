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

// Toy fully-convolutional segmentation network with per-patch latent heads.
//
//   encoder:  S stages, each a stride-2 3x3 conv (+ optional stride-1 convs), ReLU
//   seg head: 1x1 conv to N_c channels on the last stage, bilinear upsample to
//             the input resolution, softmax over channels
//   latent:   for each attached stage, every patch's feature rectangle is
//             average pooled and fed to a two-layer perceptron -> d_z

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segda/autodiff.hpp"
#include "segda/tensor.hpp"

namespace segda {

struct NetConfig {
  std::size_t image_h = 64;
  std::size_t image_w = 128;
  std::size_t num_classes = 5;
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t convs_per_stage = 1;
  std::vector<std::size_t> latent_stages{2, 3};  // 1-based stage indices
  std::size_t hidden = 64;
  std::size_t latent_dim = 32;

  std::size_t stages() const { return channels.size(); }
  std::size_t stage_stride(std::size_t stage) const { return std::size_t{1} << stage; }
  void validate() const;
  // Canonical text form; its FNV-1a hash tags checkpoints.
  std::string canonical() const;
  std::uint64_t hash() const;
};

struct Rect {
  std::size_t y0 = 0, x0 = 0, h = 0, w = 0;
};

class PatchGrid {
 public:
  PatchGrid(std::size_t image_h, std::size_t image_w, std::size_t patch_h, std::size_t patch_w);

  std::size_t patch_h() const { return patch_h_; }
  std::size_t patch_w() const { return patch_w_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t count() const { return rows_ * cols_; }
  std::size_t image_h() const { return rows_ * patch_h_; }
  std::size_t image_w() const { return cols_ * patch_w_; }

  Rect image_rect(std::size_t patch) const;
  // Rectangle on a feature map downsampled by `stride`.
  Rect feature_rect(std::size_t patch, std::size_t stride) const;

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;

 private:
  std::size_t patch_h_, patch_w_, rows_, cols_;
};

struct ModelParams {
  NetConfig config;
  std::map<std::string, Tensor> tensors;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

ModelParams init_params(const NetConfig& config, std::uint64_t seed);

/// Throws if the grid is not usable by the latent heads of `config`.
void check_grid(const NetConfig& config, const PatchGrid& grid);

struct NetNodes {
  ad::NodeId logits = 0;
  ad::NodeId probs = 0;
  std::vector<ad::NodeId> stage_features;
  std::vector<ad::NodeId> latents;  // [N_p, d_z] per attached stage
};

/// Appends the network applied to `image` to `graph`. Parameter leaves are
/// shared by name, so calling this for several images reuses one weight set.
/// Latent heads are built only when `grid` is given.
NetNodes build_network(ad::Graph& graph, const NetConfig& config, ad::NodeId image, const PatchGrid* grid);

ad::Bindings bind_params(const ModelParams& params);

struct NetOutputs {
  Tensor probs;                 // [N_c, H, W]
  std::vector<Tensor> latents;  // per attached stage, [N_p, d_z]
};

Tensor segment(const ModelParams& params, const Tensor& image);
std::vector<Tensor> project_latent(const ModelParams& params, const Tensor& image, const PatchGrid& grid);
/// Segmentation and latent vectors from a single encoder pass.
NetOutputs forward(const ModelParams& params, const Tensor& image, const PatchGrid& grid,
                   ad::EvalStats* stats = nullptr);

// Checkpoints: see README for the byte layout.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace segda
