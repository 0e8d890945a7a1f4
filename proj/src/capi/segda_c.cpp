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

#include "segda/segda.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "segda/config.hpp"
#include "segda/disparity.hpp"
#include "segda/error.hpp"
#include "segda/eval.hpp"
#include "segda/fda.hpp"
#include "segda/image_io.hpp"
#include "segda/pairing.hpp"
#include "segda/pipeline.hpp"
#include "segda/rng.hpp"

struct segda_config {
  segda::RunConfig cfg;
};

struct segda_model {
  segda::ModelParams params;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string g_last_error;

segda_status to_status(segda::ErrorCode c) {
  switch (c) {
    case segda::ErrorCode::kInvalidArgument: return SEGDA_ERR_INVALID_ARGUMENT;
    case segda::ErrorCode::kShapeMismatch: return SEGDA_ERR_SHAPE_MISMATCH;
    case segda::ErrorCode::kNonFinite: return SEGDA_ERR_NON_FINITE;
    case segda::ErrorCode::kIo: return SEGDA_ERR_IO;
    case segda::ErrorCode::kFormat: return SEGDA_ERR_FORMAT;
    case segda::ErrorCode::kConfig: return SEGDA_ERR_CONFIG;
    case segda::ErrorCode::kState: return SEGDA_ERR_STATE;
  }
  return SEGDA_ERR_INTERNAL;
}

template <typename F>
segda_status guarded(F&& f) {
  try {
    f();
    return SEGDA_OK;
  } catch (const segda::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return SEGDA_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SEGDA_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) segda::fail(segda::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

}  // namespace

extern "C" {

const char* segda_last_error(void) { return g_last_error.c_str(); }

const char* segda_status_name(segda_status status) {
  switch (status) {
    case SEGDA_OK: return "OK";
    case SEGDA_ERR_INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case SEGDA_ERR_SHAPE_MISMATCH: return "SHAPE_MISMATCH";
    case SEGDA_ERR_NON_FINITE: return "NON_FINITE";
    case SEGDA_ERR_IO: return "IO";
    case SEGDA_ERR_FORMAT: return "FORMAT";
    case SEGDA_ERR_CONFIG: return "CONFIG";
    case SEGDA_ERR_STATE: return "STATE";
    case SEGDA_ERR_INTERNAL: return "INTERNAL";
  }
  return "UNKNOWN";
}

const char* segda_version(void) { return "0.1.0"; }

segda_status segda_config_create(segda_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new segda_config{};
  });
}

segda_status segda_config_load(const char* path, segda_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new segda_config{segda::RunConfig::load(path)};
  });
}

segda_status segda_config_set(segda_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

namespace {

void copy_out(const std::string& v, char* buf, size_t cap, size_t* needed, const std::string& what) {
  if (needed) *needed = v.size() + 1;
  if (!buf) return;
  if (cap < v.size() + 1) segda::fail(segda::ErrorCode::kInvalidArgument, "buffer too small for " + what);
  std::memcpy(buf, v.c_str(), v.size() + 1);
}

}  // namespace

segda_status segda_config_get(const segda_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    copy_out(cfg->cfg.get(key), buf, cap, needed, "'" + std::string(key) + "'");
  });
}

segda_status segda_config_text(const segda_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    copy_out(cfg->cfg.to_text(), buf, cap, needed, "config text");
  });
}

size_t segda_config_key_count(void) { return segda::config_keys().size(); }

segda_status segda_config_key(size_t index, const char** name, const char** default_value, const char** help) {
  return guarded([&] {
    const auto& keys = segda::config_keys();
    if (index >= keys.size()) segda::fail(segda::ErrorCode::kInvalidArgument, "config key index out of range");
    if (name) *name = keys[index].name.c_str();
    if (default_value) *default_value = keys[index].default_value.c_str();
    if (help) *help = keys[index].help.c_str();
  });
}

segda_status segda_config_write(const segda_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.write(path);
  });
}

void segda_config_destroy(segda_config* cfg) { delete cfg; }

segda_status segda_generate_data(const segda_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const segda::BenchmarkSpec spec = cfg->cfg.benchmark();
    fs::create_directories(out_dir);
    segda::write_benchmark(out_dir, segda::generate_benchmark(spec), spec);
    cfg->cfg.write((fs::path(out_dir) / "config.txt").string());
  });
}

segda_status segda_translate_png(const char* source_png, const char* target_png, double window_ratio,
                                 const char* out_png) {
  return guarded([&] {
    require(source_png, "source_png");
    require(target_png, "target_png");
    require(out_png, "out_png");
    const segda::Tensor src = segda::read_rgb_png(source_png);
    const segda::Tensor tgt = segda::read_rgb_png(target_png);
    segda::write_rgb_png(out_png, segda::fda_translate(src, tgt, window_ratio));
  });
}

segda_status segda_disparity_files(const char* label_a, const char* label_b, int num_classes, int exact,
                                   double out[4]) {
  return guarded([&] {
    require(label_a, "label_a");
    require(label_b, "label_b");
    require(out, "out");
    if (num_classes <= 0 || num_classes > 255) segda::fail(segda::ErrorCode::kInvalidArgument, "num_classes out of range");
    const segda::LabelMap a = segda::read_label_png(label_a);
    const segda::LabelMap b = segda::read_label_png(label_b);
    a.validate(num_classes, label_a);
    b.validate(num_classes, label_b);
    if (exact) {
      out[0] = segda::exact_disparity(a, b);
      out[1] = out[2] = out[3] = 0.0;
    } else {
      const segda::DisparityBreakdown d = segda::pyramid_disparity_detail(a, b, num_classes);
      out[0] = d.total;
      for (int i = 0; i < 3; ++i) out[i + 1] = d.weighted[i];
    }
  });
}

segda_status segda_mine_pairs_files(const segda_config* cfg, const char* query_label, const char* key_label,
                                    int pseudo, const char* out_csv, size_t* num_pairs) {
  return guarded([&] {
    require(cfg, "cfg");
    require(query_label, "query_label");
    require(key_label, "key_label");
    require(out_csv, "out_csv");
    const segda::TrainConfig t = cfg->cfg.phase2();
    const segda::LabelMap q = segda::read_label_png(query_label);
    const segda::LabelMap k = segda::read_label_png(key_label);
    q.validate(segda::kSceneClasses, query_label);
    k.validate(segda::kSceneClasses, key_label);
    if (q.h != k.h || q.w != k.w) segda::fail(segda::ErrorCode::kShapeMismatch, "query and key label maps differ in size");
    const segda::PatchGrid grid(q.h, q.w, t.patch_h, t.patch_w);
    const auto d = segda::disparity_matrix(q, k, grid, segda::kSceneClasses, t.matching);
    const auto mined = segda::mine_pairs(d, t.alpha, t.beta, t.negatives, segda::mix_seed(t.seed, 20));
    const auto sets = segda::to_pair_sets(mined, 0, segda::Domain::kTarget, 0, segda::Domain::kSource,
                                          pseudo ? segda::LabelSource::kPseudo : segda::LabelSource::kGroundTruth);
    std::ofstream os(out_csv);
    if (!os) segda::fail(segda::ErrorCode::kIo, std::string(out_csv) + ": cannot write");
    segda::write_pair_sets(os, sets);
    if (num_pairs) *num_pairs = sets.size();
  });
}

segda_status segda_train(const segda_config* cfg, const char* out_dir, double* val_miou) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const segda::TwoPhaseOptions opts = cfg->cfg.two_phase(out_dir);
    fs::create_directories(out_dir);
    cfg->cfg.write((fs::path(out_dir) / "config.txt").string());
    const segda::TrainingSet data = segda::make_training_set(cfg->cfg, segda::load_or_generate(cfg->cfg));
    const segda::TwoPhaseResult r = segda::run_two_phase(data, opts);
    if (val_miou) *val_miou = r.phase2.final_val_miou;
  });
}

segda_status segda_model_load(const char* checkpoint, segda_model** out) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    *out = new segda_model{segda::load_checkpoint(checkpoint)};
  });
}

segda_status segda_model_segment(const segda_model* model, const char* image_png, const char* label_png,
                                 const char* color_png) {
  return guarded([&] {
    require(model, "model");
    require(image_png, "image_png");
    require(label_png, "label_png");
    const segda::LabelMap pred = segda::pseudo_labels(segda::segment(model->params, segda::read_rgb_png(image_png)));
    segda::write_label_png(label_png, pred);
    if (color_png) segda::write_color_label_png(color_png, pred);
  });
}

void segda_model_destroy(segda_model* model) { delete model; }

segda_status segda_evaluate(const segda_config* cfg, const char* checkpoint, const char* out_dir, double* miou) {
  return guarded([&] {
    require(cfg, "cfg");
    require(checkpoint, "checkpoint");
    const segda::ModelParams params = segda::load_checkpoint(checkpoint);
    const segda::Benchmark b = segda::load_or_generate(cfg->cfg);
    const segda::IoUReport report = segda::miou(segda::confusion_on(params, b.val));
    if (out_dir) {
      const fs::path dir(out_dir);
      fs::create_directories(dir / "predictions");
      cfg->cfg.write((dir / "config.txt").string());
      segda::write_iou_csv((dir / "iou.csv").string(), report);
      for (const segda::Scene& s : b.val) {
        const segda::LabelMap pred = segda::pseudo_labels(segda::segment(params, s.image));
        segda::write_color_label_png((dir / "predictions" / (s.id + ".png")).string(), pred);
      }
    }
    if (!report.defined) segda::fail(segda::ErrorCode::kState, report.message);
    if (miou) *miou = report.miou;
  });
}

segda_status segda_ablate(const segda_config* cfg, const char* axis, const uint64_t* seeds, size_t num_seeds,
                          const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(axis, "axis");
    require(out_dir, "out_dir");
    if (num_seeds == 0 || !seeds) segda::fail(segda::ErrorCode::kInvalidArgument, "at least one seed is required");
    const auto cells = segda::ablation_axis(axis);
    const fs::path dir = fs::path(out_dir) / axis;
    fs::create_directories(dir);
    cfg->cfg.write((dir / "config.txt").string());
    const auto rows = segda::run_cells(cfg->cfg, cells, std::vector<std::uint64_t>(seeds, seeds + num_seeds), dir.string());
    segda::write_ablation_csv((fs::path(out_dir) / ("ablation_" + std::string(axis) + ".csv")).string(), axis, rows);
  });
}

}  // extern "C"
