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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "segda/error.hpp"
#include "segda/eval.hpp"

using namespace segda;

namespace {

// IoU per class by direct pixel counting, no matrix involved.
std::vector<double> counted_iou(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& gts, std::size_t nc,
                                std::vector<bool>& present) {
  std::vector<double> inter(nc), uni(nc);
  present.assign(nc, false);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    for (std::size_t i = 0; i < gts[k].size(); ++i) {
      const auto g = gts[k].data[i], p = preds[k].data[i];
      if (g == kVoid) continue;
      present[g] = true;
      for (std::size_t c = 0; c < nc; ++c) {
        inter[c] += (g == c && p == c);
        uni[c] += (g == c || p == c);
      }
    }
  }
  std::vector<double> out(nc);
  for (std::size_t c = 0; c < nc; ++c) out[c] = uni[c] > 0 ? inter[c] / uni[c] : 0.0;
  return out;
}

}  // namespace

TEST_CASE("accumulate examples") {
  ConfusionMatrix cm(2);
  LabelMap gt(1, 2), pred(1, 2, 0);
  gt.data = {0, 1};
  cm.accumulate(pred, gt);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(0, 1) == 0);
  CHECK(cm.total() == 2);

  const ConfusionMatrix before = cm;
  cm.accumulate(pred, LabelMap(1, 2, kVoid));
  CHECK(cm == before);

  std::mt19937_64 rng(1);
  const LabelMap m = oracle::random_labels(rng, 5, 7, 4, 0.2);
  ConfusionMatrix diag(4);
  diag.accumulate(m, m);
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t p = 0; p < 4; ++p) {
      if (g != p) CHECK(diag.at(g, p) == 0);
    }
  }
  CHECK(diag.total() == m.count_annotated());
  CHECK_THROWS_AS(cm.accumulate(LabelMap(2, 2), gt), Error);
}

TEST_CASE("mIoU examples") {
  ConfusionMatrix cm(2);
  LabelMap gt(2, 2), pred(2, 2, 0);
  gt.data = {0, 0, 1, 1};
  cm.accumulate(pred, gt);
  const IoUReport r = miou(cm);
  REQUIRE(r.defined);
  CHECK(*r.per_class[0] == 0.5);
  CHECK(*r.per_class[1] == 0.0);
  CHECK(r.miou == 0.25);

  ConfusionMatrix perfect(5);
  perfect.accumulate(gt, gt);
  const IoUReport p = miou(perfect);
  CHECK(p.miou == 1.0);
  CHECK(p.counted == std::vector<bool>{true, true, false, false, false});

  const IoUReport empty = miou(ConfusionMatrix(3));
  CHECK_FALSE(empty.defined);
  CHECK(std::isnan(empty.miou));
  CHECK_FALSE(empty.message.empty());
}

TEST_CASE("mIoU agrees with pixel counting") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<LabelMap> preds, gts;
    ConfusionMatrix cm(5);
    for (int k = 0; k < 3; ++k) {
      preds.push_back(oracle::random_labels(rng, 6, 9, 5, 0.0));
      gts.push_back(oracle::random_labels(rng, 6, 9, 4, 0.1));  // class 4 absent from gt
      cm.accumulate(preds.back(), gts.back());
    }
    std::vector<bool> present;
    const auto ref = counted_iou(preds, gts, 5, present);
    const IoUReport r = miou(cm);
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(r.counted[c] == present[c]);
      if (!present[c]) continue;
      CHECK(*r.per_class[c] == doctest::Approx(ref[c]).epsilon(1e-15));
      CHECK(*r.per_class[c] >= 0.0);
      CHECK(*r.per_class[c] <= 1.0);
      sum += ref[c];
      ++n;
    }
    CHECK(r.miou == doctest::Approx(sum / n).epsilon(1e-14));
  }
}

TEST_CASE("order and relabeling invariance") {
  std::mt19937_64 rng(3);
  std::vector<LabelMap> preds, gts;
  for (int k = 0; k < 6; ++k) {
    preds.push_back(oracle::random_labels(rng, 4, 4, 5, 0.0));
    gts.push_back(oracle::random_labels(rng, 4, 4, 5, 0.2));
  }
  ConfusionMatrix forward(5), shuffled(5), merged(5), half(5);
  for (int k = 0; k < 6; ++k) forward.accumulate(preds[k], gts[k]);
  std::vector<int> order(6);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int k : order) shuffled.accumulate(preds[k], gts[k]);
  CHECK(forward == shuffled);
  for (int k = 0; k < 3; ++k) merged.accumulate(preds[k], gts[k]);
  for (int k = 3; k < 6; ++k) half.accumulate(preds[k], gts[k]);
  merged.merge(half);
  CHECK(merged == forward);

  const std::vector<std::uint8_t> perm{3, 0, 4, 1, 2};
  auto relabel = [&](LabelMap m) {
    for (auto& v : m.data) {
      if (v != kVoid) v = perm[v];
    }
    return m;
  };
  ConfusionMatrix permuted(5);
  for (int k = 0; k < 6; ++k) permuted.accumulate(relabel(preds[k]), relabel(gts[k]));
  CHECK(miou(permuted).miou == doctest::Approx(miou(forward).miou).epsilon(1e-14));
}

TEST_CASE("iou report csv") {
  ConfusionMatrix cm(3);
  LabelMap gt(1, 2), pred(1, 2, 0);
  gt.data = {0, 1};
  cm.accumulate(pred, gt);
  const auto path = (std::filesystem::temp_directory_path() / "segda_iou.csv").string();
  write_iou_csv(path, miou(cm));
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  CHECK(ss.str() == "class,iou\n0,0.5\n1,0\n2,\nmiou,0.25\n");
  write_iou_csv(path, miou(ConfusionMatrix(2)));
  std::ifstream again(path);
  std::stringstream s2;
  s2 << again.rdbuf();
  CHECK(s2.str().find("miou,undefined") != std::string::npos);
}
