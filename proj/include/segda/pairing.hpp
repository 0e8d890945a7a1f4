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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "segda/autodiff.hpp"
#include "segda/disparity.hpp"
#include "segda/labels.hpp"

namespace segda {

enum class LabelSource { kGroundTruth, kPseudo };

const char* label_source_name(LabelSource s);

/// Query row -> chosen positive column and sampled negative columns.
struct MinedPair {
  std::size_t query = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
  double positive_disparity = 0.0;
};

struct PatchRef {
  std::size_t image = 0;
  std::size_t patch = 0;
  Domain domain = Domain::kTarget;
};

struct PairSet {
  PatchRef query;
  PatchRef positive;
  std::vector<PatchRef> negatives;
  double disparity = 0.0;  // query vs positive
  LabelSource source = LabelSource::kGroundTruth;
};

/// For every query row with at least one D < alpha and at least k D > beta
/// candidates: positive = argmin (lowest index on ties), negatives = k seeded
/// draws without replacement among the D > beta columns. Other rows are skipped.
std::vector<MinedPair> mine_pairs(const DisparityMatrix& disparities, double alpha, double beta, std::size_t k,
                                  std::uint64_t seed);

std::vector<PairSet> to_pair_sets(const std::vector<MinedPair>& mined, std::size_t query_image, Domain query_domain,
                                  std::size_t key_image, Domain key_domain, LabelSource source);

// Line format: query_img,query_patch,pos_img,pos_patch,neg_patch...,disparity,label_source
void write_pair_sets(std::ostream& os, const std::vector<PairSet>& pairs);
std::vector<PairSet> read_pair_sets(std::istream& is);

/// -log softmax over the k+1 logits cos(q, .)/tau, positive as the target.
double contrastive_loss(std::span<const double> query, std::span<const double> positive,
                        const std::vector<std::span<const double>>& negatives, double tau);

/// The ratio form sim(q,+) / (sim(q,+) + sum sim(q,-)), sim = exp(cos/tau).
/// Overflows for small tau; used as a cross-check.
double contrastive_loss_ratio_form(std::span<const double> query, std::span<const double> positive,
                                   const std::vector<std::span<const double>>& negatives, double tau);

/// Sum over `pairs` of the contrastive loss, queries taken from rows of
/// `queries` [N, D] and keys from rows of `keys` [M, D]. Returns a [1] node.
ad::NodeId contrastive_loss_node(ad::Graph& graph, ad::NodeId queries, ad::NodeId keys,
                                 const std::vector<MinedPair>& pairs, double tau);

}  // namespace segda
