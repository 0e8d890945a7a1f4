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

// segda command-line tool. A thin layer over the C API; see README for usage.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segda/segda.h"

namespace {

struct Failure {
  segda_status status;
};

void check(segda_status s) {
  if (s != SEGDA_OK) throw Failure{s};
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out_dir;
};

void add_common(CLI::App* app, Common& c, bool out_dir_required) {
  app->add_option("--config", c.config_path, "key = value config file");
  app->add_option("--set", c.overrides, "override, key=value (repeatable)");
  app->add_option("--seed", c.seed, "global seed");
  auto* o = app->add_option("--out-dir", c.out_dir, "output directory");
  if (out_dir_required) o->required();
}

class Config {
 public:
  explicit Config(const Common& c) {
    if (c.config_path.empty()) {
      check(segda_config_create(&cfg_));
    } else {
      check(segda_config_load(c.config_path.c_str(), &cfg_));
    }
    for (const std::string& o : c.overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        check(segda_config_set(cfg_, o.c_str(), ""));  // reports the malformed override
      }
      check(segda_config_set(cfg_, o.substr(0, eq).c_str(), o.substr(eq + 1).c_str()));
    }
    if (c.seed >= 0) check(segda_config_set(cfg_, "seed", std::to_string(c.seed).c_str()));
  }
  ~Config() { segda_config_destroy(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;

  segda_config* get() const { return cfg_; }
  std::string value(const char* key) const {
    size_t needed = 0;
    check(segda_config_get(cfg_, key, nullptr, 0, &needed));
    std::string buf(needed, '\0');
    check(segda_config_get(cfg_, key, buf.data(), buf.size(), &needed));
    buf.resize(needed - 1);
    return buf;
  }
  std::string text() const {
    size_t needed = 0;
    check(segda_config_text(cfg_, nullptr, 0, &needed));
    std::string buf(needed, '\0');
    check(segda_config_text(cfg_, buf.data(), buf.size(), &needed));
    buf.resize(needed - 1);
    return buf;
  }
  void write_into(const std::string& dir) const {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    check(segda_config_write(cfg_, (std::filesystem::path(dir) / "config.txt").c_str()));
  }

 private:
  segda_config* cfg_ = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-contrastive domain adaptation on a synthetic segmentation benchmark"};
  app.require_subcommand(1);

  Common gen_c, tr_c, disp_c, mine_c, train_c, eval_c, abl_c, cfg_c;

  auto* gen = app.add_subcommand("generate-data", "write the synthetic two-domain benchmark");
  add_common(gen, gen_c, true);

  std::string src_png, tgt_png, out_png;
  double ratio = -1;
  auto* tr = app.add_subcommand("translate", "transfer low-frequency amplitude from a target image");
  add_common(tr, tr_c, false);
  tr->add_option("--source", src_png, "source RGB PNG")->required();
  tr->add_option("--target", tgt_png, "target RGB PNG")->required();
  tr->add_option("--window-ratio", ratio, "window ratio (default: fda.window_ratio)");
  tr->add_option("--out", out_png, "output PNG")->required();

  std::string label_a, label_b;
  bool exact = false;
  int num_classes = 5;
  auto* disp = app.add_subcommand("disparity", "semantic disparity between two label maps");
  add_common(disp, disp_c, false);
  disp->add_option("a", label_a, "label PNG")->required();
  disp->add_option("b", label_b, "label PNG")->required();
  disp->add_flag("--exact", exact, "pixel-exact matching instead of the pyramid");
  disp->add_option("--num-classes", num_classes, "class count");

  std::string query, key, pairs_out;
  bool pseudo = false;
  auto* mine = app.add_subcommand("mine-pairs", "mine positive/negative patch pairs between two label maps");
  add_common(mine, mine_c, false);
  mine->add_option("--query", query, "target label PNG")->required();
  mine->add_option("--key", key, "source label PNG")->required();
  mine->add_flag("--pseudo", pseudo, "tag pairs as coming from pseudo labels");
  mine->add_option("--out", pairs_out, "pair CSV")->required();

  auto* train = app.add_subcommand("train", "two-phase training");
  add_common(train, train_c, true);

  std::string checkpoint;
  auto* ev = app.add_subcommand("eval", "score a checkpoint on the validation scenes");
  add_common(ev, eval_c, false);
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  std::string axis;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  auto* abl = app.add_subcommand("ablate", "run one ablation axis");
  add_common(abl, abl_c, true);
  abl->add_option("--axis", axis, "loss-terms | lambda-cont | tau | alpha-beta | patch-size | matching | annotation | labeled")
      ->required();
  abl->add_option("--seeds", seeds, "seeds")->delimiter(',');

  bool list_keys = false;
  auto* show = app.add_subcommand("config", "print the resolved configuration");
  add_common(show, cfg_c, false);
  show->add_flag("--keys", list_keys, "list every key with its default and meaning");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      Config cfg(gen_c);
      check(segda_generate_data(cfg.get(), gen_c.out_dir.c_str()));
      std::printf("wrote benchmark to %s\n", gen_c.out_dir.c_str());
    } else if (tr->parsed()) {
      Config cfg(tr_c);
      const double r = ratio >= 0 ? ratio : std::stod(cfg.value("fda.window_ratio"));
      check(segda_translate_png(src_png.c_str(), tgt_png.c_str(), r, out_png.c_str()));
      cfg.write_into(tr_c.out_dir);
      std::printf("wrote %s\n", out_png.c_str());
    } else if (disp->parsed()) {
      Config cfg(disp_c);
      double d[4];
      check(segda_disparity_files(label_a.c_str(), label_b.c_str(), num_classes, exact ? 1 : 0, d));
      cfg.write_into(disp_c.out_dir);
      if (exact) {
        std::printf("D=%.17g\n", d[0]);
      } else {
        std::printf("D=%.17g level0=%.17g level1=%.17g level2=%.17g\n", d[0], d[1], d[2], d[3]);
      }
    } else if (mine->parsed()) {
      Config cfg(mine_c);
      size_t n = 0;
      check(segda_mine_pairs_files(cfg.get(), query.c_str(), key.c_str(), pseudo ? 1 : 0, pairs_out.c_str(), &n));
      cfg.write_into(mine_c.out_dir);
      std::printf("pairs=%zu\n", n);
    } else if (train->parsed()) {
      Config cfg(train_c);
      double miou = 0;
      check(segda_train(cfg.get(), train_c.out_dir.c_str(), &miou));
      std::printf("val_miou=%.6f\n", miou);
    } else if (ev->parsed()) {
      Config cfg(eval_c);
      double miou = 0;
      check(segda_evaluate(cfg.get(), checkpoint.c_str(), eval_c.out_dir.empty() ? nullptr : eval_c.out_dir.c_str(),
                           &miou));
      std::printf("miou=%.6f\n", miou);
    } else if (abl->parsed()) {
      Config cfg(abl_c);
      check(segda_ablate(cfg.get(), axis.c_str(), seeds.data(), seeds.size(), abl_c.out_dir.c_str()));
      std::printf("wrote %s/ablation_%s.csv\n", abl_c.out_dir.c_str(), axis.c_str());
    } else if (show->parsed()) {
      if (list_keys) {
        for (size_t i = 0; i < segda_config_key_count(); ++i) {
          const char *name, *def, *help;
          check(segda_config_key(i, &name, &def, &help));
          std::printf("%-28s %-14s %s\n", name, *def ? def : "\"\"", help);
        }
      } else {
        Config cfg(cfg_c);
        cfg.write_into(cfg_c.out_dir);
        std::fputs(cfg.text().c_str(), stdout);
      }
    }
  } catch (const Failure& f) {
    std::string msg = segda_last_error();
    for (char& ch : msg) {
      if (ch == '\n' || ch == '"') ch = ch == '"' ? '\'' : ' ';
    }
    std::fprintf(stderr, "error status=%s message=\"%s\"\n", segda_status_name(f.status), msg.c_str());
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error status=INTERNAL message=\"%s\"\n", e.what());
    return 99;
  }
  return 0;
}
