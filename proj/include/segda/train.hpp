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

// Two-phase training: phase 1 minimizes the base objective, its model labels
// the unlabeled target scenes once, then a freshly initialized network is
// trained on the full objective with those pseudo labels.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segda/autodiff.hpp"
#include "segda/disparity.hpp"
#include "segda/labels.hpp"
#include "segda/losses.hpp"
#include "segda/rng.hpp"
#include "segda/segnet.hpp"

namespace segda {

enum class QueryDirection { kTargetQueries, kSymmetric };

struct TrainConfig {
  std::size_t max_iters = 3000;
  std::size_t batch_source = 2;
  std::size_t batch_target = 2;
  double base_lr = 2.5e-4;
  double poly_power = 0.9;
  double weight_decay = 5e-4;
  double momentum = 0.9;

  LossWeights weights;
  // Contrastive terms: sum over mined pairs (true) or their mean.
  bool cont_sum_pairs = true;

  double alpha = 3.0;
  double beta = 70.0;
  std::size_t negatives = 8;
  double tau = 0.07;
  std::size_t patch_h = 16;
  std::size_t patch_w = 32;
  MatchingStrategy matching = MatchingStrategy::kPyramid;
  QueryDirection direction = QueryDirection::kTargetQueries;

  bool use_fda = true;
  double fda_window = 0.05;

  // Phase-2 iterations at the start that minimize only the contrastive terms
  // (pre-training variant); 0 trains all terms jointly.
  std::size_t cont_pretrain_iters = 0;
  // Fill VOID pixels of partially annotated target maps with pseudo labels in phase 2.
  bool fill_void_with_pseudo = true;

  std::size_t val_every = 250;
  bool check_finite = true;
  std::uint64_t seed = 1;

  void validate() const;
};

double poly_lr(std::size_t iter, std::size_t max_iters, double base_lr, double power);

struct BatchImage {
  Tensor image;
  const LabelMap* labels = nullptr;  // null for unlabeled scenes in phase 1
  bool labeled_target = false;
  std::string tag;
};

/// One step's loss graph over a batch; bindings hold the images and the
/// parameters the graph uses.
struct StepGraph {
  ad::Graph graph;
  ad::Bindings bindings;
  LossTerms<ad::NodeId> terms;
  std::size_t pairs_gt = 0;
  std::size_t pairs_pseudo = 0;
};

/// Target scenes are queries against a source scene drawn from mining_rng.
/// With `pretraining` the objective is the contrastive terms alone.
StepGraph build_step_graph(const ModelParams& params, const std::vector<BatchImage>& sources,
                           const std::vector<BatchImage>& targets, const TrainConfig& cfg, Phase phase,
                           bool pretraining, Rng& mining_rng);

/// Training images and labels. Validation labels are read only by evaluation.
struct TrainingSet {
  std::vector<Tensor> source_images;
  std::vector<LabelMap> source_labels;
  std::vector<Tensor> labeled_images;
  std::vector<LabelMap> labeled_labels;
  std::vector<Tensor> unlabeled_images;
  std::vector<std::string> unlabeled_ids;
  std::vector<Tensor> val_images;
  std::vector<LabelMap> val_labels;
};

struct StepLog {
  std::size_t iter = 0;
  double lr = 0.0;
  double sup_source = 0.0;
  double sup_labeled = 0.0;
  double ent = 0.0;
  double self = 0.0;
  double cont_gt = 0.0;
  double cont_pseudo = 0.0;
  double total = 0.0;
  std::optional<double> val_miou;
  std::size_t pairs_gt = 0;
  std::size_t pairs_pseudo = 0;
};

struct PhaseInputs {
  // Phase 2 only: pseudo labels for unlabeled scenes, index-aligned.
  const std::vector<LabelMap>* pseudo = nullptr;
  // Phase 2 only: labels used for the labeled target scenes (VOID filled).
  const std::vector<LabelMap>* labeled_override = nullptr;
  // Written on a non-finite loss.
  std::string diagnostics_path;
};

struct PhaseResult {
  ModelParams params;
  std::vector<StepLog> log;
  double final_val_miou = 0.0;
};

PhaseResult train_phase(ModelParams params, const TrainingSet& data, const TrainConfig& cfg, Phase phase,
                        const PhaseInputs& inputs = {});

/// Labels the unlabeled images with the argmax of `params`.
std::vector<LabelMap> generate_pseudo_labels(const ModelParams& params, const std::vector<Tensor>& images);

/// Labeled-target maps with VOID pixels replaced by the model's argmax.
std::vector<LabelMap> fill_void(const ModelParams& params, const std::vector<Tensor>& images,
                                const std::vector<LabelMap>& labels);

/// Pseudo labels read from <dir>/<unlabeled id>.png.
std::vector<LabelMap> load_pseudo_labels(const std::string& dir, const TrainingSet& data);

double validation_miou(const ModelParams& params, const TrainingSet& data);

struct TwoPhaseResult {
  PhaseResult phase1;
  PhaseResult phase2;
  std::vector<LabelMap> pseudo;
  ModelParams phase1_init;
  ModelParams phase2_init;
};

struct TwoPhaseOptions {
  NetConfig net;
  TrainConfig phase1;
  TrainConfig phase2;
  // Pseudo labels loaded from <dir>/<unlabeled id>.png instead of generated.
  std::string pseudo_label_dir;
  // When set: checkpoints, metrics CSVs and pseudo-label PNGs go here.
  std::string out_dir;
};

TwoPhaseResult run_two_phase(const TrainingSet& data, const TwoPhaseOptions& options);

/// Runs phase 2 from an existing phase-1 model.
PhaseResult run_second_phase(const TrainingSet& data, const TwoPhaseOptions& options, const ModelParams& phase1_model,
                             const std::vector<LabelMap>& pseudo, const std::string& out_dir = "");

void write_metrics_csv(const std::string& path, const std::vector<StepLog>& log);

}  // namespace segda
