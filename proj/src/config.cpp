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

#include "segda/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "segda/error.hpp"

namespace segda {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> k = {
      {"seed", "1", "global seed: network init, batches, mining, split"},
      {"data.dir", "", "dataset root written by generate-data; empty generates the benchmark in memory"},
      {"data.num_source", "200", "source scenes"},
      {"data.num_target", "100", "target training scenes (labeled + unlabeled)"},
      {"data.num_val", "50", "held-out target validation scenes"},
      {"data.height", "64", "scene height"},
      {"data.width", "128", "scene width"},
      {"data.seed", "20240601", "benchmark generator seed"},
      {"data.num_labeled", "5", "labeled target scenes; 0 is unsupervised adaptation"},
      {"data.annotation_fraction", "1", "share of 10x10 blocks kept in labeled target maps"},
      {"data.annotation_block", "10", "annotation block side in pixels"},
      {"net.channels", "16,32,64", "encoder channels per stage"},
      {"net.convs_per_stage", "1", "convolutions per encoder stage"},
      {"net.latent_stages", "2,3", "1-based stages with latent heads"},
      {"net.hidden", "64", "latent head hidden width"},
      {"net.latent_dim", "32", "latent vector size"},
      {"train.iters_phase1", "3000", "phase 1 iterations"},
      {"train.iters_phase2", "3000", "phase 2 iterations"},
      {"train.batch_source", "2", "translated source scenes per step"},
      {"train.batch_target", "2", "target scenes per step"},
      {"train.lr", "2.5e-4", "initial learning rate"},
      {"train.poly_power", "0.9", "poly schedule power"},
      {"train.weight_decay", "5e-4", "L2 weight decay"},
      {"train.momentum", "0.9", "SGD momentum"},
      {"train.val_every", "250", "validation interval in iterations"},
      {"train.check_finite", "true", "abort on NaN/Inf in any node"},
      {"train.pseudo_label_dir", "", "load pseudo labels from <dir>/<id>.png instead of generating them"},
      {"train.cont_pretrain_iters", "0", "phase 2 iterations on the contrastive terms alone"},
      {"train.fill_void", "true", "fill VOID pixels of labeled target maps with phase 1 predictions"},
      {"loss.ent", "0.005", "entropy weight"},
      {"loss.self", "1", "self-training weight"},
      {"loss.cont_gt", "1e-3", "contrastive weight, ground-truth target labels"},
      {"loss.cont_pseudo", "1e-4", "contrastive weight, pseudo labels"},
      {"loss.eta", "2", "Charbonnier exponent"},
      {"loss.cont_reduction", "sum", "sum | mean over mined pairs"},
      {"pair.alpha", "3", "positive threshold"},
      {"pair.beta", "70", "negative threshold"},
      {"pair.negatives", "8", "negatives per query"},
      {"pair.tau", "0.07", "contrastive temperature"},
      {"pair.patch_h", "16", "patch height"},
      {"pair.patch_w", "32", "patch width"},
      {"pair.matching", "pyramid", "pyramid | exact"},
      {"pair.direction", "target", "target (target queries) | symmetric"},
      {"fda.enabled", "true", "translate source scenes in training batches"},
      {"fda.window_ratio", "0.05", "low-frequency window ratio in [0, 0.5]"},
  };
  std::sort(k.begin(), k.end(), [](const ConfigKey& a, const ConfigKey& b) { return a.name < b.name; });
  return k;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
      fail(ErrorCode::kConfig, key + ": expected a comma-separated list of integers, got '" + v + "'");
    }
    out.push_back(n);
  }
  return out;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

RunConfig::RunConfig() {
  for (const ConfigKey& k : config_keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kConfig, where + ": expected 'key = value'");
    try {
      cfg.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), where + ": " + e.what());
    }
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  const std::string old = it->second;
  it->second = value;
  try {
    // Typed access validates the value; the derived structs validate ranges.
    if (key == "net.channels" || key == "net.latent_stages") {
      parse_list(key, value);
    } else if (key == "pair.matching") {
      if (value != "pyramid" && value != "exact") fail(ErrorCode::kConfig, key + ": expected pyramid or exact");
    } else if (key == "loss.cont_reduction") {
      if (value != "sum" && value != "mean") fail(ErrorCode::kConfig, key + ": expected sum or mean");
    } else if (key == "pair.direction") {
      if (value != "target" && value != "symmetric") fail(ErrorCode::kConfig, key + ": expected target or symmetric");
    } else if (key == "data.dir" || key == "train.pseudo_label_dir") {
    } else if (key == "train.check_finite" || key == "train.fill_void" || key == "fda.enabled") {
      get_bool(key);
    } else if ((key.starts_with("loss.") && key != "loss.cont_reduction") || key.starts_with("fda.") || key == "train.lr" || key == "train.poly_power" ||
               key == "train.weight_decay" || key == "train.momentum" || key == "pair.alpha" || key == "pair.beta" ||
               key == "pair.tau" || key == "data.annotation_fraction") {
      get_double(key);
    } else {
      get_size(key);
    }
  } catch (...) {
    it->second = old;
    throw;
  }
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorCode::kConfig, "override '" + assignment + "': expected key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  return os.str();
}

void RunConfig::write(const std::string& path) const {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, path + ": cannot write config");
  os << to_text();
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t n = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    fail(ErrorCode::kConfig, key + ": expected an integer, got '" + v + "'");
  }
  return n;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const std::int64_t n = get_int(key);
  if (n < 0) fail(ErrorCode::kConfig, key + ": must be non-negative");
  return static_cast<std::size_t>(n);
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size()) fail(ErrorCode::kConfig, key + ": expected a number, got '" + v + "'");
  return d;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::kConfig, key + ": expected true or false, got '" + v + "'");
}

std::uint64_t RunConfig::seed() const { return get_size("seed"); }

NetConfig RunConfig::net() const {
  NetConfig n;
  n.image_h = get_size("data.height");
  n.image_w = get_size("data.width");
  n.num_classes = kSceneClasses;
  n.channels = parse_list("net.channels", get("net.channels"));
  n.convs_per_stage = get_size("net.convs_per_stage");
  n.latent_stages = parse_list("net.latent_stages", get("net.latent_stages"));
  n.hidden = get_size("net.hidden");
  n.latent_dim = get_size("net.latent_dim");
  n.validate();
  return n;
}

BenchmarkSpec RunConfig::benchmark() const {
  BenchmarkSpec b;
  b.num_source = get_size("data.num_source");
  b.num_target = get_size("data.num_target");
  b.num_val = get_size("data.num_val");
  b.h = get_size("data.height");
  b.w = get_size("data.width");
  b.seed = get_size("data.seed");
  return b;
}

namespace {

TrainConfig common_train(const RunConfig& c) {
  TrainConfig t;
  t.batch_source = c.get_size("train.batch_source");
  t.batch_target = c.get_size("train.batch_target");
  t.base_lr = c.get_double("train.lr");
  t.poly_power = c.get_double("train.poly_power");
  t.weight_decay = c.get_double("train.weight_decay");
  t.momentum = c.get_double("train.momentum");
  t.val_every = c.get_size("train.val_every");
  t.check_finite = c.get_bool("train.check_finite");
  t.fill_void_with_pseudo = c.get_bool("train.fill_void");
  t.weights.ent = c.get_double("loss.ent");
  t.weights.self = c.get_double("loss.self");
  t.weights.cont_gt = c.get_double("loss.cont_gt");
  t.weights.cont_pseudo = c.get_double("loss.cont_pseudo");
  t.weights.eta = c.get_double("loss.eta");
  t.cont_sum_pairs = c.get("loss.cont_reduction") == "sum";
  t.alpha = c.get_double("pair.alpha");
  t.beta = c.get_double("pair.beta");
  t.negatives = c.get_size("pair.negatives");
  t.tau = c.get_double("pair.tau");
  t.patch_h = c.get_size("pair.patch_h");
  t.patch_w = c.get_size("pair.patch_w");
  t.matching = c.get("pair.matching") == "exact" ? MatchingStrategy::kExact : MatchingStrategy::kPyramid;
  t.direction = c.get("pair.direction") == "symmetric" ? QueryDirection::kSymmetric : QueryDirection::kTargetQueries;
  t.use_fda = c.get_bool("fda.enabled");
  t.fda_window = c.get_double("fda.window_ratio");
  t.seed = c.seed();
  return t;
}

}  // namespace

TrainConfig RunConfig::phase1() const {
  TrainConfig t = common_train(*this);
  t.max_iters = get_size("train.iters_phase1");
  t.weights.self = 0.0;
  t.weights.cont_gt = 0.0;
  t.weights.cont_pseudo = 0.0;
  t.validate();
  return t;
}

TrainConfig RunConfig::phase2() const {
  TrainConfig t = common_train(*this);
  t.max_iters = get_size("train.iters_phase2");
  t.cont_pretrain_iters = get_size("train.cont_pretrain_iters");
  if (t.cont_pretrain_iters >= t.max_iters && t.cont_pretrain_iters > 0) {
    fail(ErrorCode::kConfig, "train.cont_pretrain_iters must be below train.iters_phase2");
  }
  t.validate();
  return t;
}

TwoPhaseOptions RunConfig::two_phase(const std::string& out_dir) const {
  TwoPhaseOptions o;
  o.net = net();
  o.phase1 = phase1();
  o.phase2 = phase2();
  o.pseudo_label_dir = get("train.pseudo_label_dir");
  o.out_dir = out_dir;
  return o;
}

}  // namespace segda
