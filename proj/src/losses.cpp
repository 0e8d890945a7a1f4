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

#include "segda/losses.hpp"

#include <atomic>
#include <cmath>

#include "segda/error.hpp"

namespace segda {
namespace {

std::atomic<std::size_t> g_all_void_warnings{0};

void check_pred(const Tensor& pred, const LabelMap& labels) {
  if (pred.rank() != 3 || pred.dim(1) != labels.h || pred.dim(2) != labels.w) {
    fail(ErrorCode::kShapeMismatch, "prediction " + shape_string(pred.shape()) + " does not match labels " +
                                        std::to_string(labels.h) + "x" + std::to_string(labels.w));
  }
}

void check_phase_terms(bool has_self, bool has_cont, Phase phase) {
  if (phase == Phase::kBase && (has_self || has_cont)) {
    fail(ErrorCode::kInvalidArgument, "base objective takes no self-training or contrastive terms");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (ent < 0 || self < 0 || cont_gt < 0 || cont_pseudo < 0) {
    fail(ErrorCode::kConfig, "loss weights must be non-negative");
  }
  if (!(eta > 0)) fail(ErrorCode::kConfig, "eta must be positive");
}

const char* phase_name(Phase p) { return p == Phase::kBase ? "base" : "full"; }

std::size_t all_void_warnings() { return g_all_void_warnings.load(); }

Tensor label_mask(const LabelMap& labels, std::size_t num_classes, double weight) {
  Tensor mask({num_classes, labels.h, labels.w});
  for (std::size_t y = 0; y < labels.h; ++y) {
    for (std::size_t x = 0; x < labels.w; ++x) {
      const std::uint8_t c = labels.at(y, x);
      if (c == kVoid) continue;
      if (c >= num_classes) fail(ErrorCode::kInvalidArgument, "label " + std::to_string(c) + " >= num_classes");
      mask.at(c, y, x) = weight;
    }
  }
  return mask;
}

std::optional<ad::NodeId> cross_entropy_node(ad::Graph& g, ad::NodeId probs, const LabelMap& labels) {
  const Shape& s = g.node(probs).shape;
  if (s.size() != 3 || s[1] != labels.h || s[2] != labels.w) {
    fail(ErrorCode::kShapeMismatch, "cross_entropy: prediction " + shape_string(s) + " does not match labels");
  }
  const std::size_t scored = labels.count_annotated();
  if (scored == 0) {
    ++g_all_void_warnings;
    return std::nullopt;
  }
  const ad::NodeId mask = g.constant(label_mask(labels, s[0], -1.0 / static_cast<double>(scored)));
  return g.sum(g.mul(mask, g.log(g.add_scalar(probs, kLogEpsilon))));
}

ad::NodeId entropy_node(ad::Graph& g, ad::NodeId probs, double eta) {
  if (!(eta > 0)) fail(ErrorCode::kInvalidArgument, "entropy: eta must be positive");
  const ad::NodeId plogp = g.mul(probs, g.log(g.add_scalar(probs, kLogEpsilon)));
  const ad::NodeId entropy = g.scale(g.sum_axis(plogp, 0), -1.0);
  const ad::NodeId rho = g.pow(g.add_scalar(g.mul(entropy, entropy), kCharbonnierEpsSq), eta);
  return g.mean(rho);
}

double charbonnier(double x, double eta) { return std::pow(x * x + kCharbonnierEpsSq, eta); }

double cross_entropy(const Tensor& pred, const LabelMap& labels) {
  check_pred(pred, labels);
  ad::Graph g;
  const ad::NodeId p = g.input("pred", pred.shape());
  const auto ce = cross_entropy_node(g, p, labels);
  if (!ce) return 0.0;
  return ad::forward(g, {{"pred", pred}})[*ce][0];
}

double entropy_reg(const Tensor& pred, double eta) {
  if (pred.rank() != 3) fail(ErrorCode::kShapeMismatch, "entropy_reg: prediction must be [C,H,W]");
  ad::Graph g;
  const ad::NodeId p = g.input("pred", pred.shape());
  const ad::NodeId e = entropy_node(g, p, eta);
  return ad::forward(g, {{"pred", pred}})[e][0];
}

LabelMap pseudo_labels(const Tensor& pred) {
  if (pred.rank() != 3) fail(ErrorCode::kShapeMismatch, "pseudo_labels: prediction must be [C,H,W]");
  const std::size_t nc = pred.dim(0), h = pred.dim(1), w = pred.dim(2);
  if (nc >= kVoid) fail(ErrorCode::kInvalidArgument, "pseudo_labels: too many classes");
  LabelMap out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < nc; ++c) {
        if (pred.at(c, y, x) > pred.at(best, y, x)) best = c;
      }
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

double total_loss(const LossComponents& c, const LossWeights& w, Phase phase) {
  if (!c.sup_source) fail(ErrorCode::kInvalidArgument, "total_loss: source supervised term is required");
  check_phase_terms(c.self.has_value(), c.cont_gt.has_value() || c.cont_pseudo.has_value(), phase);
  double total = *c.sup_source + c.sup_labeled.value_or(0.0) + w.ent * c.ent.value_or(0.0);
  if (phase == Phase::kFull) {
    total += w.self * c.self.value_or(0.0) + w.cont_gt * c.cont_gt.value_or(0.0) +
             w.cont_pseudo * c.cont_pseudo.value_or(0.0);
  }
  return total;
}

ad::NodeId total_loss_node(ad::Graph& g, const LossTerms<ad::NodeId>& c, const LossWeights& w, Phase phase) {
  if (!c.sup_source) fail(ErrorCode::kInvalidArgument, "total_loss: source supervised term is required");
  check_phase_terms(c.self.has_value(), c.cont_gt.has_value() || c.cont_pseudo.has_value(), phase);
  ad::NodeId total = *c.sup_source;
  auto add = [&](const std::optional<ad::NodeId>& term, double weight) {
    if (term) total = g.add(total, weight == 1.0 ? *term : g.scale(*term, weight));
  };
  add(c.sup_labeled, 1.0);
  add(c.ent, w.ent);
  if (phase == Phase::kFull) {
    add(c.self, w.self);
    add(c.cont_gt, w.cont_gt);
    add(c.cont_pseudo, w.cont_pseudo);
  }
  return total;
}

}  // namespace segda
