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

#include "segda/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "segda/error.hpp"
#include "segda/eval.hpp"
#include "segda/fda.hpp"
#include "segda/image_io.hpp"
#include "segda/pairing.hpp"
#include "segda/rng.hpp"

namespace segda {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 10;
constexpr std::uint64_t kMiningStream = 20;

std::uint64_t phase_index(Phase p) { return p == Phase::kBase ? 1 : 2; }

// Accumulates per-image loss nodes and reduces them to a mean.
struct TermBuilder {
  std::vector<ad::NodeId> nodes;
  std::optional<ad::NodeId> mean(ad::Graph& g) const {
    if (nodes.empty()) return std::nullopt;
    ad::NodeId acc = nodes[0];
    for (std::size_t i = 1; i < nodes.size(); ++i) acc = g.add(acc, nodes[i]);
    return nodes.size() == 1 ? acc : g.scale(acc, 1.0 / static_cast<double>(nodes.size()));
  }
};

// Each node already sums over its pairs.
struct ContrastiveBuilder {
  std::vector<ad::NodeId> nodes;
  std::size_t pairs = 0;
  std::optional<ad::NodeId> reduce(ad::Graph& g, bool sum) const {
    if (nodes.empty()) return std::nullopt;
    ad::NodeId acc = nodes[0];
    for (std::size_t i = 1; i < nodes.size(); ++i) acc = g.add(acc, nodes[i]);
    return sum ? acc : g.scale(acc, 1.0 / static_cast<double>(pairs));
  }
};

void sgd_step(ModelParams& params, std::map<std::string, Tensor>& velocity, const std::map<std::string, Tensor>& grads,
              double lr, const TrainConfig& cfg) {
  for (const auto& [name, g] : grads) {
    Tensor& w = params.tensors.at(name);
    auto [it, inserted] = velocity.try_emplace(name, Tensor(w.shape()));
    Tensor& v = it->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = cfg.momentum * v[i] + g[i] + cfg.weight_decay * w[i];
      w[i] -= lr * v[i];
    }
  }
}

bool uses_contrastive(const TrainConfig& cfg, Phase phase) {
  return phase == Phase::kFull &&
         (cfg.weights.cont_gt > 0 || cfg.weights.cont_pseudo > 0 || cfg.cont_pretrain_iters > 0);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfig, "train config: " + what); };
  if (max_iters == 0) bad("max_iters must be positive");
  if (batch_source == 0 || batch_target == 0) bad("batch sizes must be positive");
  if (!(base_lr >= 0)) bad("learning rate must be non-negative");
  if (!(poly_power > 0)) bad("poly power must be positive");
  if (weight_decay < 0 || momentum < 0 || momentum >= 1) bad("weight decay / momentum out of range");
  if (!(alpha >= 0 && alpha < beta)) bad("need 0 <= alpha < beta");
  if (negatives == 0) bad("negatives must be >= 1");
  if (!(tau > 0)) bad("tau must be positive");
  if (!(fda_window >= 0 && fda_window <= 0.5)) bad("fda window ratio must lie in [0, 0.5]");
  if (val_every == 0) bad("val_every must be positive");
  weights.validate();
}

double poly_lr(std::size_t iter, std::size_t max_iters, double base_lr, double power) {
  if (max_iters == 0 || iter > max_iters) {
    fail(ErrorCode::kInvalidArgument, "poly_lr: iteration " + std::to_string(iter) + " outside [0, " +
                                          std::to_string(max_iters) + "]");
  }
  return base_lr * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(max_iters), power);
}

std::vector<LabelMap> generate_pseudo_labels(const ModelParams& params, const std::vector<Tensor>& images) {
  std::vector<LabelMap> out;
  out.reserve(images.size());
  for (const Tensor& img : images) out.push_back(pseudo_labels(segment(params, img)));
  return out;
}

std::vector<LabelMap> fill_void(const ModelParams& params, const std::vector<Tensor>& images,
                                const std::vector<LabelMap>& labels) {
  std::vector<LabelMap> out = labels;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].count_annotated() == out[i].size()) continue;
    const LabelMap guess = pseudo_labels(segment(params, images[i]));
    for (std::size_t p = 0; p < out[i].size(); ++p) {
      if (out[i].data[p] == kVoid) out[i].data[p] = guess.data[p];
    }
  }
  return out;
}

double validation_miou(const ModelParams& params, const TrainingSet& data) {
  if (data.val_images.empty()) return 0.0;
  const IoUReport r = miou(confusion_on(params, data.val_images, data.val_labels));
  return r.defined ? r.miou : 0.0;
}

StepGraph build_step_graph(const ModelParams& params, const std::vector<BatchImage>& sources,
                           const std::vector<BatchImage>& targets, const TrainConfig& cfg, Phase phase,
                           bool pretraining, Rng& mining_rng) {
  const NetConfig& net = params.config;
  const PatchGrid grid(net.image_h, net.image_w, cfg.patch_h, cfg.patch_w);
  const bool contrastive = uses_contrastive(cfg, phase);
  StepGraph step;
  ad::Graph& g = step.graph;
  ad::Bindings& bindings = step.bindings;
  LossTerms<ad::NodeId>& terms = step.terms;
  TermBuilder sup_s, sup_l, ent, self;
  ContrastiveBuilder cont_gt, cont_pseudo;
  std::vector<NetNodes> src_nodes, tgt_nodes;

  for (std::size_t i = 0; i < sources.size(); ++i) {
    const std::string name = "source" + std::to_string(i);
    const ad::NodeId in = g.input(name, sources[i].image.shape());
    bindings.emplace(name, sources[i].image);
    src_nodes.push_back(build_network(g, net, in, contrastive ? &grid : nullptr));
    if (auto ce = cross_entropy_node(g, src_nodes.back().probs, *sources[i].labels)) sup_s.nodes.push_back(*ce);
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string name = "target" + std::to_string(i);
    const ad::NodeId in = g.input(name, targets[i].image.shape());
    bindings.emplace(name, targets[i].image);
    tgt_nodes.push_back(build_network(g, net, in, contrastive ? &grid : nullptr));
    const ad::NodeId probs = tgt_nodes.back().probs;
    if (targets[i].labeled_target) {
      if (auto ce = cross_entropy_node(g, probs, *targets[i].labels)) sup_l.nodes.push_back(*ce);
    } else {
      ent.nodes.push_back(entropy_node(g, probs, cfg.weights.eta));
      if (phase == Phase::kFull) {
        if (auto ce = cross_entropy_node(g, probs, *targets[i].labels)) self.nodes.push_back(*ce);
      }
    }
  }

  if (contrastive) {
    auto add_pairs = [&](const NetNodes& q_nodes, const LabelMap& q_labels, const NetNodes& k_nodes,
                         const LabelMap& k_labels, ContrastiveBuilder& into) {
      const DisparityMatrix d = disparity_matrix(q_labels, k_labels, grid, net.num_classes, cfg.matching);
      const std::vector<MinedPair> mined = mine_pairs(d, cfg.alpha, cfg.beta, cfg.negatives, mining_rng.next());
      if (mined.empty()) return;
      for (std::size_t s = 0; s < q_nodes.latents.size(); ++s) {
        into.nodes.push_back(contrastive_loss_node(g, q_nodes.latents[s], k_nodes.latents[s], mined, cfg.tau));
      }
      into.pairs += mined.size();
    };
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const std::size_t key = mining_rng.below(sources.size());
      ContrastiveBuilder& into = targets[i].labeled_target ? cont_gt : cont_pseudo;
      add_pairs(tgt_nodes[i], *targets[i].labels, src_nodes[key], *sources[key].labels, into);
      if (cfg.direction == QueryDirection::kSymmetric) {
        add_pairs(src_nodes[key], *sources[key].labels, tgt_nodes[i], *targets[i].labels, into);
      }
    }
  }

  terms.sup_source = sup_s.mean(g);
  terms.sup_labeled = sup_l.mean(g);
  terms.ent = ent.mean(g);
  if (phase == Phase::kFull) {
    terms.self = self.mean(g);
    terms.cont_gt = cont_gt.reduce(g, cfg.cont_sum_pairs);
    terms.cont_pseudo = cont_pseudo.reduce(g, cfg.cont_sum_pairs);
  }

  ad::NodeId total;
  if (pretraining) {
    // Contrastive-only objective; falls back to a zero-gradient step when
    // no pairs were mined.
    std::optional<ad::NodeId> acc;
    for (const auto& t : {terms.cont_gt, terms.cont_pseudo}) {
      if (t) acc = acc ? g.add(*acc, *t) : *t;
    }
    total = acc ? *acc : g.scale(*terms.sup_source, 0.0);
  } else {
    total = total_loss_node(g, terms, cfg.weights, phase);
  }
  g.set_output(total);
  step.pairs_gt = cont_gt.pairs;
  step.pairs_pseudo = cont_pseudo.pairs;

  for (const auto& [name, t] : params.tensors) {
    bool used = false;
    for (ad::NodeId id : g.parameters()) used = used || g.node(id).name == name;
    if (used) bindings.emplace(name, t);
  }

  return step;
}

PhaseResult train_phase(ModelParams params, const TrainingSet& data, const TrainConfig& cfg, Phase phase,
                        const PhaseInputs& inputs) {
  cfg.validate();
  const NetConfig& net = params.config;
  if (data.source_images.empty()) fail(ErrorCode::kInvalidArgument, "training needs source scenes");
  if (data.labeled_images.empty() && data.unlabeled_images.empty()) {
    fail(ErrorCode::kInvalidArgument, "training needs target scenes");
  }
  if (phase == Phase::kFull && (!inputs.pseudo || inputs.pseudo->size() != data.unlabeled_images.size())) {
    fail(ErrorCode::kState, "full phase requires pseudo labels for every unlabeled scene");
  }
  const std::vector<LabelMap>& labeled_labels = inputs.labeled_override ? *inputs.labeled_override : data.labeled_labels;

  check_grid(net, PatchGrid(net.image_h, net.image_w, cfg.patch_h, cfg.patch_w));
  const bool contrastive = uses_contrastive(cfg, phase);

  Rng batch_rng(mix_seed(cfg.seed, kBatchStream + phase_index(phase)));
  Rng mining_rng(mix_seed(cfg.seed, kMiningStream + phase_index(phase)));
  const ad::EvalOptions eval_opts{cfg.check_finite};

  PhaseResult result;
  std::map<std::string, Tensor> velocity;
  std::vector<std::size_t> source_order(data.source_images.size());
  for (std::size_t i = 0; i < source_order.size(); ++i) source_order[i] = i;
  const std::size_t target_pool = data.labeled_images.size() + data.unlabeled_images.size();

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const double lr = poly_lr(it, cfg.max_iters, cfg.base_lr, cfg.poly_power);
    const bool pretraining = contrastive && it < cfg.cont_pretrain_iters;

    // Batch: translated source scenes, then target scenes (a labeled one first
    // when any exist).
    std::vector<BatchImage> sources, targets;
    for (std::size_t idx : batch_rng.sample(source_order, cfg.batch_source)) {
      BatchImage b;
      b.labels = &data.source_labels[idx];
      b.tag = "source#" + std::to_string(idx);
      if (cfg.use_fda) {
        const std::size_t t = batch_rng.below(target_pool);
        const Tensor& style = t < data.labeled_images.size() ? data.labeled_images[t]
                                                             : data.unlabeled_images[t - data.labeled_images.size()];
        b.image = fda_translate(data.source_images[idx], style, cfg.fda_window);
        b.tag += "<-target#" + std::to_string(t);
      } else {
        b.image = data.source_images[idx];
      }
      sources.push_back(std::move(b));
    }
    for (std::size_t slot = 0; slot < cfg.batch_target; ++slot) {
      BatchImage b;
      const bool take_labeled = !data.labeled_images.empty() && (slot == 0 || data.unlabeled_images.empty());
      if (take_labeled) {
        const std::size_t idx = batch_rng.below(data.labeled_images.size());
        b.image = data.labeled_images[idx];
        b.labels = &labeled_labels[idx];
        b.labeled_target = true;
        b.tag = "labeled#" + std::to_string(idx);
      } else {
        const std::size_t idx = batch_rng.below(data.unlabeled_images.size());
        b.image = data.unlabeled_images[idx];
        if (phase == Phase::kFull) b.labels = &(*inputs.pseudo)[idx];
        b.tag = "unlabeled#" + std::to_string(idx);
      }
      targets.push_back(std::move(b));
    }

    StepGraph step = build_step_graph(params, sources, targets, cfg, phase, pretraining, mining_rng);
    const LossTerms<ad::NodeId>& terms = step.terms;

    ad::ForwardBackward fb;
    try {
      fb = ad::forward_backward(step.graph, step.bindings, eval_opts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      std::ostringstream diag;
      diag << "non-finite loss at " << phase_name(phase) << " iteration " << it << " (lr " << lr << "): " << e.what()
           << "\nbatch:";
      for (const auto& b : sources) diag << ' ' << b.tag;
      for (const auto& b : targets) diag << ' ' << b.tag;
      if (!inputs.diagnostics_path.empty()) {
        std::ofstream(inputs.diagnostics_path) << diag.str() << '\n';
      }
      fail(ErrorCode::kNonFinite, diag.str());
    }

    StepLog log;
    log.iter = it;
    log.lr = lr;
    auto value = [&](const std::optional<ad::NodeId>& n) { return n ? fb.values[*n][0] : 0.0; };
    log.sup_source = value(terms.sup_source);
    log.sup_labeled = value(terms.sup_labeled);
    log.ent = value(terms.ent);
    log.self = value(terms.self);
    log.cont_gt = value(terms.cont_gt);
    log.cont_pseudo = value(terms.cont_pseudo);
    log.total = fb.output;
    log.pairs_gt = step.pairs_gt;
    log.pairs_pseudo = step.pairs_pseudo;

    sgd_step(params, velocity, fb.gradients, lr, cfg);
    if (!params.all_finite()) fail(ErrorCode::kNonFinite, "parameters became non-finite at iteration " + std::to_string(it));

    if ((it + 1) % cfg.val_every == 0 || it + 1 == cfg.max_iters) log.val_miou = validation_miou(params, data);
    result.log.push_back(log);
  }
  result.final_val_miou = result.log.back().val_miou.value_or(0.0);
  result.params = std::move(params);
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<StepLog>& log) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << "iter,lr,L_sup_s,L_sup_l,L_ent,L_self,L_cont_gt,L_cont_pseudo,total,val_miou\n";
  for (const StepLog& s : log) {
    os << s.iter << ',' << format_double(s.lr) << ',' << format_double(s.sup_source) << ','
       << format_double(s.sup_labeled) << ',' << format_double(s.ent) << ',' << format_double(s.self) << ','
       << format_double(s.cont_gt) << ',' << format_double(s.cont_pseudo) << ',' << format_double(s.total) << ',';
    if (s.val_miou) os << format_double(*s.val_miou);
    os << '\n';
  }
}

std::vector<LabelMap> load_pseudo_labels(const std::string& dir, const TrainingSet& data) {
  std::vector<LabelMap> out;
  for (std::size_t i = 0; i < data.unlabeled_ids.size(); ++i) {
    const std::string path = (fs::path(dir) / (data.unlabeled_ids[i] + ".png")).string();
    LabelMap m = read_label_png(path);
    if (m.h != data.unlabeled_images[i].dim(1) || m.w != data.unlabeled_images[i].dim(2)) {
      fail(ErrorCode::kFormat, path + ": pseudo label size differs from its image");
    }
    out.push_back(std::move(m));
  }
  return out;
}

PhaseResult run_second_phase(const TrainingSet& data, const TwoPhaseOptions& options, const ModelParams& phase1_model,
                             const std::vector<LabelMap>& pseudo, const std::string& out_dir) {
  std::vector<LabelMap> labeled = data.labeled_labels;
  if (options.phase2.fill_void_with_pseudo) labeled = fill_void(phase1_model, data.labeled_images, labeled);
  PhaseInputs in;
  in.pseudo = &pseudo;
  in.labeled_override = &labeled;
  if (!out_dir.empty()) in.diagnostics_path = (fs::path(out_dir) / "phase2_nonfinite.txt").string();
  ModelParams init = init_params(options.net, mix_seed(options.phase2.seed, kInitStream + 1));
  PhaseResult r = train_phase(std::move(init), data, options.phase2, Phase::kFull, in);
  if (!out_dir.empty()) {
    save_checkpoint((fs::path(out_dir) / "phase2.ckpt").string(), r.params);
    write_metrics_csv((fs::path(out_dir) / "metrics_phase2.csv").string(), r.log);
  }
  return r;
}

TwoPhaseResult run_two_phase(const TrainingSet& data, const TwoPhaseOptions& options) {
  TwoPhaseResult result;
  const std::string& out = options.out_dir;
  if (!out.empty()) fs::create_directories(out);

  result.phase1_init = init_params(options.net, mix_seed(options.phase1.seed, kInitStream));
  PhaseInputs in1;
  if (!out.empty()) in1.diagnostics_path = (fs::path(out) / "phase1_nonfinite.txt").string();
  result.phase1 = train_phase(result.phase1_init, data, options.phase1, Phase::kBase, in1);
  if (!out.empty()) {
    save_checkpoint((fs::path(out) / "phase1.ckpt").string(), result.phase1.params);
    write_metrics_csv((fs::path(out) / "metrics_phase1.csv").string(), result.phase1.log);
  }

  result.pseudo = options.pseudo_label_dir.empty() ? generate_pseudo_labels(result.phase1.params, data.unlabeled_images)
                                                   : load_pseudo_labels(options.pseudo_label_dir, data);
  if (!out.empty()) {
    const fs::path dir = fs::path(out) / "pseudo_labels";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < result.pseudo.size(); ++i) {
      write_label_png((dir / (data.unlabeled_ids[i] + ".png")).string(), result.pseudo[i]);
    }
  }

  result.phase2_init = init_params(options.net, mix_seed(options.phase2.seed, kInitStream + 1));
  result.phase2 = run_second_phase(data, options, result.phase1.params, result.pseudo, out);
  return result;
}

}  // namespace segda
