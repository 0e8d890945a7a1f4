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

// Segmentation losses. All pixel losses are means over scored pixels.
//
//   cross entropy   mean over non-VOID pixels of -log(p_true + 1e-12)
//   entropy reg     mean over pixels of rho(H(p)), rho(x) = (x^2 + 0.001^2)^eta
//   base objective  L_sup^s + L_sup^l + l_ent * L_ent
//   full objective  base + l_self * L_self + l_gt * L_cont(GT) + l_pse * L_cont(pseudo)

#include <cstddef>
#include <optional>

#include "segda/autodiff.hpp"
#include "segda/labels.hpp"
#include "segda/tensor.hpp"

namespace segda {

inline constexpr double kLogEpsilon = 1e-12;
inline constexpr double kCharbonnierEpsSq = 1e-6;  // 0.001^2

struct LossWeights {
  double ent = 0.005;
  double self = 1.0;
  double cont_gt = 1e-3;
  double cont_pseudo = 1e-4;
  double eta = 2.0;

  void validate() const;
};

enum class Phase { kBase, kFull };

const char* phase_name(Phase p);

/// One-hot mask of `labels` over num_classes channels, each annotated pixel
/// weighted by `weight`; VOID pixels are all zero.
Tensor label_mask(const LabelMap& labels, std::size_t num_classes, double weight);

/// Mean cross entropy node. Returns nullopt for an all-VOID map and bumps
/// all_void_warnings().
std::optional<ad::NodeId> cross_entropy_node(ad::Graph& graph, ad::NodeId probs, const LabelMap& labels);
ad::NodeId entropy_node(ad::Graph& graph, ad::NodeId probs, double eta);

double cross_entropy(const Tensor& pred, const LabelMap& labels);
double entropy_reg(const Tensor& pred, double eta);
double charbonnier(double x, double eta);

/// Per-pixel argmax, ties to the lowest class index.
LabelMap pseudo_labels(const Tensor& pred);

std::size_t all_void_warnings();

template <typename T>
struct LossTerms {
  std::optional<T> sup_source;
  std::optional<T> sup_labeled;
  std::optional<T> ent;
  std::optional<T> self;
  std::optional<T> cont_gt;
  std::optional<T> cont_pseudo;
};

using LossComponents = LossTerms<double>;

double total_loss(const LossComponents& components, const LossWeights& weights, Phase phase);
ad::NodeId total_loss_node(ad::Graph& graph, const LossTerms<ad::NodeId>& components, const LossWeights& weights,
                           Phase phase);

}  // namespace segda
