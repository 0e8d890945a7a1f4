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

#include "segda/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "segda/error.hpp"
#include "segda/rng.hpp"

namespace segda {
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitStream = 31;
constexpr std::uint64_t kAnnotationStream = 32;

// Keys that only influence phase 2.
const char* const kPhase2Keys[] = {"loss.self",        "loss.cont_gt",        "loss.cont_pseudo", "loss.cont_reduction", "train.iters_phase2",
                                   "train.fill_void",  "train.pseudo_label_dir", "train.cont_pretrain_iters",
                                   "pair.alpha",       "pair.beta",           "pair.negatives",   "pair.tau",
                                   "pair.patch_h",     "pair.patch_w",        "pair.matching",    "pair.direction"};

std::string phase1_key(const RunConfig& cfg) {
  RunConfig c = cfg;
  for (const char* k : kPhase2Keys) c.set(k, RunConfig().get(k));
  return c.to_text();
}

std::string data_key(const RunConfig& cfg) {
  std::ostringstream os;
  for (const char* k : {"data.dir", "data.num_source", "data.num_target", "data.num_val", "data.height", "data.width",
                        "data.seed"}) {
    os << k << '=' << cfg.get(k) << ';';
  }
  return os.str();
}

}  // namespace

Benchmark load_or_generate(const RunConfig& cfg) {
  const std::string dir = cfg.get("data.dir");
  if (dir.empty()) return generate_benchmark(cfg.benchmark());
  Benchmark b;
  auto part = [&](const char* name, Domain d) {
    const fs::path p = fs::path(dir) / name;
    return load_dataset((p / "images").string(), (p / "labels").string(), kSceneClasses, d);
  };
  b.source = part("source", Domain::kSource);
  b.target = part("target", Domain::kTarget);
  b.val = part("val", Domain::kTarget);
  return b;
}

void write_benchmark(const std::string& dir, const Benchmark& b, const BenchmarkSpec& spec) {
  write_dataset((fs::path(dir) / "source").string(), b.source);
  write_dataset((fs::path(dir) / "target").string(), b.target);
  write_dataset((fs::path(dir) / "val").string(), b.val);
  std::ofstream m(fs::path(dir) / "manifest.txt");
  if (!m) fail(ErrorCode::kIo, dir + "/manifest.txt: cannot write");
  m << "seed " << spec.seed << "\nsize " << spec.h << 'x' << spec.w << "\nsource " << spec.num_source << "\ntarget "
    << spec.num_target << "\nval " << spec.num_val << "\nsource_style " << source_style().describe()
    << "\ntarget_style " << target_style().describe() << "\n";
  auto list = [&](const char* name, const std::vector<Scene>& scenes) {
    for (const Scene& s : scenes) m << name << ' ' << s.id << '\n';
  };
  list("scene source", b.source);
  list("scene target", b.target);
  list("scene val", b.val);
}

TrainingSet make_training_set(const RunConfig& cfg, const Benchmark& b) {
  const std::uint64_t seed = cfg.seed();
  SsdaSplit split = split_ssda(b.source, b.target, cfg.get_size("data.num_labeled"), mix_seed(seed, kSplitStream));
  const double fraction = cfg.get_double("data.annotation_fraction");
  const std::size_t block = cfg.get_size("data.annotation_block");

  TrainingSet t;
  for (const Scene& s : split.source) {
    t.source_images.push_back(s.image);
    t.source_labels.push_back(s.labels);
  }
  Rng ann(mix_seed(seed, kAnnotationStream));
  for (const Scene& s : split.labeled) {
    t.labeled_images.push_back(s.image);
    t.labeled_labels.push_back(fraction < 1.0 ? partial_annotation(s.labels, fraction, ann.next(), block) : s.labels);
  }
  for (const UnlabeledScene& u : split.unlabeled) {
    t.unlabeled_images.push_back(u.image);
    t.unlabeled_ids.push_back(u.id);
  }
  for (const Scene& s : b.val) {
    t.val_images.push_back(s.image);
    t.val_labels.push_back(s.labels);
  }
  return t;
}

const std::vector<std::string>& ablation_axes() {
  static const std::vector<std::string> axes = {"loss-terms", "lambda-cont", "tau",        "alpha-beta",
                                                "patch-size", "matching",    "annotation", "labeled"};
  return axes;
}

std::vector<AblationCell> ablation_axis(const std::string& axis) {
  if (axis == "loss-terms") {
    return {{"L_base", {}, true},
            {"L_base+L_self", {"loss.cont_gt=0", "loss.cont_pseudo=0"}},
            {"L_base+L_self+L_cont", {}}};
  }
  if (axis == "lambda-cont") {
    return {{"gt=0,pseudo=0", {"loss.cont_gt=0", "loss.cont_pseudo=0"}},
            {"gt=1e-3,pseudo=0", {"loss.cont_gt=1e-3", "loss.cont_pseudo=0"}},
            {"gt=1e-3,pseudo=1e-3", {"loss.cont_gt=1e-3", "loss.cont_pseudo=1e-3"}},
            {"gt=1e-3,pseudo=1e-4", {"loss.cont_gt=1e-3", "loss.cont_pseudo=1e-4"}},
            {"gt=1e-4,pseudo=1e-4", {"loss.cont_gt=1e-4", "loss.cont_pseudo=1e-4"}}};
  }
  if (axis == "tau") return {{"0.05", {"pair.tau=0.05"}}, {"0.07", {"pair.tau=0.07"}}, {"0.1", {"pair.tau=0.1"}}};
  if (axis == "alpha-beta") {
    return {{"1/80", {"pair.alpha=1", "pair.beta=80"}},
            {"3/70", {"pair.alpha=3", "pair.beta=70"}},
            {"10/40", {"pair.alpha=10", "pair.beta=40"}}};
  }
  if (axis == "patch-size") {
    return {{"16x8", {"pair.patch_w=16", "pair.patch_h=8"}},
            {"32x16", {"pair.patch_w=32", "pair.patch_h=16"}},
            {"128x64", {"pair.patch_w=128", "pair.patch_h=64"}}};
  }
  if (axis == "matching") return {{"exact", {"pair.matching=exact"}}, {"pyramid", {"pair.matching=pyramid"}}};
  if (axis == "annotation") {
    return {{"100%", {"data.annotation_fraction=1"}},
            {"75%", {"data.annotation_fraction=0.75"}},
            {"50%", {"data.annotation_fraction=0.5"}},
            {"25%", {"data.annotation_fraction=0.25"}}};
  }
  if (axis == "labeled") {
    return {{"0", {"data.num_labeled=0"}}, {"5", {"data.num_labeled=5"}}, {"20", {"data.num_labeled=20"}}};
  }
  std::string known;
  for (const auto& a : ablation_axes()) known += (known.empty() ? "" : ", ") + a;
  fail(ErrorCode::kConfig, "unknown ablation axis '" + axis + "' (known: " + known + ")");
}

double CellResult::mean() const {
  if (miou.empty()) return 0.0;
  return std::accumulate(miou.begin(), miou.end(), 0.0) / static_cast<double>(miou.size());
}

std::vector<CellResult> run_cells(const RunConfig& base, const std::vector<AblationCell>& cells,
                                  const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  struct Phase1 {
    ModelParams params;
    std::vector<StepLog> log;
    double miou = 0.0;
    std::vector<LabelMap> pseudo;
  };
  std::map<std::string, Benchmark> benchmarks;
  std::map<std::string, std::shared_ptr<TrainingSet>> sets;
  std::map<std::string, Phase1> phase1_runs;

  std::vector<CellResult> results;
  for (const AblationCell& cell : cells) {
    CellResult r;
    r.name = cell.name;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.set("seed", std::to_string(seed));
      for (const std::string& o : cell.overrides) cfg.apply_override(o);
      const TwoPhaseOptions opts = cfg.two_phase("");

      const std::string dkey = data_key(cfg);
      if (!benchmarks.count(dkey)) benchmarks.emplace(dkey, load_or_generate(cfg));
      const std::string skey = dkey + cfg.get("seed") + ';' + cfg.get("data.num_labeled") + ';' +
                               cfg.get("data.annotation_fraction") + ';' + cfg.get("data.annotation_block");
      if (!sets.count(skey)) sets.emplace(skey, std::make_shared<TrainingSet>(make_training_set(cfg, benchmarks.at(dkey))));
      const TrainingSet& data = *sets.at(skey);

      const std::string pkey = phase1_key(cfg);
      auto it = phase1_runs.find(pkey);
      if (it == phase1_runs.end()) {
        Phase1 p;
        PhaseResult res = train_phase(init_params(opts.net, mix_seed(seed, 1)), data, opts.phase1, Phase::kBase);
        p.params = std::move(res.params);
        p.log = std::move(res.log);
        p.miou = res.final_val_miou;
        p.pseudo = generate_pseudo_labels(p.params, data.unlabeled_images);
        it = phase1_runs.emplace(pkey, std::move(p)).first;
      }
      const Phase1& p1 = it->second;

      std::string run_dir;
      if (!out_dir.empty()) {
        run_dir = (fs::path(out_dir) / cell.name / ("seed" + std::to_string(seed))).string();
        fs::create_directories(run_dir);
        cfg.write((fs::path(run_dir) / "config.txt").string());
        write_metrics_csv((fs::path(run_dir) / "metrics_phase1.csv").string(), p1.log);
      }
      if (cell.base_only) {
        r.miou.push_back(p1.miou);
      } else {
        const std::vector<LabelMap> loaded =
            opts.pseudo_label_dir.empty() ? std::vector<LabelMap>{} : load_pseudo_labels(opts.pseudo_label_dir, data);
        const PhaseResult p2 =
            run_second_phase(data, opts, p1.params, opts.pseudo_label_dir.empty() ? p1.pseudo : loaded, run_dir);
        r.miou.push_back(p2.final_val_miou);
      }
      r.seeds.push_back(seed);
    }
    results.push_back(std::move(r));
  }
  return results;
}

void write_ablation_csv(const std::string& path, const std::string& axis, const std::vector<CellResult>& rows) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, path + ": cannot write");
  os.precision(10);
  os << "axis,cell,seeds,miou_mean,miou_per_seed\n";
  for (const CellResult& r : rows) {
    std::string seeds, per;
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
      seeds += (i ? ";" : "") + std::to_string(r.seeds[i]);
      std::ostringstream v;
      v.precision(10);
      v << r.miou[i];
      per += (i ? ";" : "") + v.str();
    }
    os << axis << ",\"" << r.name << "\"," << seeds << ',' << r.mean() << ',' << per << '\n';
  }
}

}  // namespace segda
