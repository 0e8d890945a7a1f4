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

// End-to-end operations shared by the C API, the CLI and the acceptance
// harness: dataset assembly from a RunConfig, two-phase runs and ablation
// sweeps.

#include <cstdint>
#include <string>
#include <vector>

#include "segda/config.hpp"
#include "segda/data.hpp"
#include "segda/train.hpp"

namespace segda {

/// Generated benchmark or the directory tree written by write_benchmark.
Benchmark load_or_generate(const RunConfig& cfg);

/// <dir>/{source,target,val}/{images,labels} plus manifest.txt.
void write_benchmark(const std::string& dir, const Benchmark& b, const BenchmarkSpec& spec);

/// SSDA split and partial annotation as configured; validation scenes are
/// the held-out target set.
TrainingSet make_training_set(const RunConfig& cfg, const Benchmark& b);

struct AblationCell {
  std::string name;
  std::vector<std::string> overrides;  // key=value
  bool base_only = false;              // score the phase 1 model
};

/// Cells of a named sweep axis: loss-terms, lambda-cont, tau, alpha-beta,
/// patch-size, matching, annotation, labeled.
std::vector<AblationCell> ablation_axis(const std::string& axis);
const std::vector<std::string>& ablation_axes();

struct CellResult {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> miou;  // per seed, final validation mIoU
  double mean() const;
};

/// Runs every cell for every seed. Phase 1 is trained once per distinct
/// phase 1 configuration and shared by cells that agree on it. Each run's
/// artifacts go to <out_dir>/<cell>/seed<k>/ when out_dir is set.
std::vector<CellResult> run_cells(const RunConfig& base, const std::vector<AblationCell>& cells,
                                  const std::vector<std::uint64_t>& seeds, const std::string& out_dir = "");

/// axis,cell,seeds,miou_mean,miou_per_seed
void write_ablation_csv(const std::string& path, const std::string& axis, const std::vector<CellResult>& rows);

}  // namespace segda
