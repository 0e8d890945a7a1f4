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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "segda/error.hpp"
#include "segda/segnet.hpp"

using namespace segda;

namespace {

Tensor random_image(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  return oracle::random_tensor(rng, {3, h, w}, 0, 1);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("segda_test_" + name)).string();
}

}  // namespace

TEST_CASE("init is seeded and shaped by the config") {
  const NetConfig cfg;
  const ModelParams a = init_params(cfg, 1), b = init_params(cfg, 1), c = init_params(cfg, 2);
  CHECK(a.tensors == b.tensors);
  CHECK(a.tensors != c.tensors);
  CHECK(a.tensors.at("proj.s2.w2").dim(1) == 32);
  CHECK(a.tensors.at("proj.s3.w1").dim(0) == 64);
  CHECK(a.tensors.at("head.w").dim(0) == 5);
  for (const auto& [name, t] : a.tensors) {
    if (name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2")) CHECK(t == Tensor(t.shape()));
  }
  // conv weights 3*3*(3*16 + 16*32 + 32*64) + head 64*5 + projectors
  const std::size_t expected = 9 * (3 * 16 + 16 * 32 + 32 * 64) + (16 + 32 + 64) + 64 * 5 + 5 +
                               (32 * 64 + 64 + 64 * 32 + 32) + (64 * 64 + 64 + 64 * 32 + 32);
  CHECK(a.parameter_count() == expected);

  NetConfig bad;
  bad.channels = {};
  CHECK_THROWS_AS(init_params(bad, 1), Error);
  bad = NetConfig{};
  bad.latent_stages = {4};
  CHECK_THROWS_AS(init_params(bad, 1), Error);
}

TEST_CASE("segment produces per-pixel distributions") {
  std::mt19937_64 rng(4);
  const ModelParams p = init_params(NetConfig{}, 3);
  const Tensor probs = segment(p, random_image(rng, 64, 128));
  CHECK(probs.shape() == Shape{5, 64, 128});
  const std::size_t hw = 64 * 128;
  for (std::size_t i = 0; i < hw; i += 7) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) total += probs[c * hw + i];
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  ModelParams zero = p;
  zero.tensors.at("head.w").fill(0.0);
  zero.tensors.at("head.b").fill(0.0);
  const Tensor uniform = segment(zero, random_image(rng, 64, 128));
  double worst = 0;
  for (double v : uniform.values()) worst = std::max(worst, std::abs(v - 0.2));
  CHECK(worst < 1e-15);

  CHECK_THROWS_AS(segment(p, random_image(rng, 32, 128)), Error);
}

TEST_CASE("patch grid") {
  const PatchGrid g(64, 128, 16, 32);
  CHECK(g.rows() == 4);
  CHECK(g.cols() == 4);
  CHECK(g.count() == 16);
  const Rect r = g.image_rect(6);
  CHECK(r.y0 == 16);
  CHECK(r.x0 == 64);
  const Rect f = g.feature_rect(6, 8);
  CHECK(f.y0 == 2);
  CHECK(f.x0 == 8);
  CHECK(f.h == 2);
  CHECK(f.w == 4);
  CHECK_THROWS_AS(PatchGrid(64, 128, 16, 30), Error);  // not divisible by 4
  CHECK_THROWS_AS(PatchGrid(64, 128, 24, 32), Error);  // does not tile the image
  NetConfig cfg;
  CHECK_THROWS_AS(check_grid(cfg, PatchGrid(64, 128, 4, 8)), Error);  // smaller than one stage-3 cell
  CHECK_NOTHROW(check_grid(cfg, PatchGrid(64, 128, 8, 16)));
}

TEST_CASE("latent vectors have the configured width") {
  std::mt19937_64 rng(8);
  const ModelParams p = init_params(NetConfig{}, 5);
  const auto z = project_latent(p, random_image(rng, 64, 128), PatchGrid(64, 128, 16, 32));
  REQUIRE(z.size() == 2);
  for (const Tensor& t : z) CHECK(t.shape() == Shape{16, 32});
}

TEST_CASE("a patch's latent depends only on the patch plus the receptive margin") {
  std::mt19937_64 rng(12);
  const ModelParams p = init_params(NetConfig{}, 6);
  const PatchGrid grid(64, 128, 16, 32);
  const Tensor a = random_image(rng, 64, 128);
  Tensor b = random_image(rng, 64, 128);
  // Patch 5 covers rows 16..31, cols 32..63; three stride-2 3x3 convs reach
  // at most 7 pixels beyond it.
  const std::size_t y0 = 16 - 8, y1 = 32 + 8, x0 = 32 - 8, x1 = 64 + 8;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) b.at(c, y, x) = a.at(c, y, x);
    }
  }
  const auto za = project_latent(p, a, grid), zb = project_latent(p, b, grid);
  for (std::size_t s = 0; s < za.size(); ++s) {
    for (std::size_t d = 0; d < 32; ++d) CHECK(std::abs(za[s][5 * 32 + d] - zb[s][5 * 32 + d]) < 1e-12);
    double other = 0;
    for (std::size_t d = 0; d < 32; ++d) other = std::max(other, std::abs(za[s][0 * 32 + d] - zb[s][0 * 32 + d]));
    CHECK(other > 1e-6);
  }
}

TEST_CASE("swapping patch contents swaps their latents") {
  NetConfig cfg;
  cfg.image_h = 64;
  cfg.image_w = 256;
  const ModelParams p = init_params(cfg, 9);
  const PatchGrid grid(64, 256, 32, 64);  // 2x4 patches
  std::mt19937_64 rng(13);
  Tensor a({3, 64, 256}, 0.5);
  // Random content in the centre of patches 1 and 2, leaving an 8 pixel
  // constant border so neither latent sees the other's content.
  auto fill_centre = [&](Tensor& t, std::size_t patch, const Tensor& src, std::size_t src_patch) {
    const Rect r = grid.image_rect(patch), s = grid.image_rect(src_patch);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 8; y < r.h - 8; ++y) {
        for (std::size_t x = 8; x < r.w - 8; ++x) t.at(c, r.y0 + y, r.x0 + x) = src.at(c, s.y0 + y, s.x0 + x);
      }
    }
  };
  const Tensor noise = random_image(rng, 64, 256);
  fill_centre(a, 1, noise, 1);
  fill_centre(a, 2, noise, 2);
  Tensor b = a;
  fill_centre(b, 1, a, 2);
  fill_centre(b, 2, a, 1);
  const auto za = project_latent(p, a, grid), zb = project_latent(p, b, grid);
  for (std::size_t s = 0; s < za.size(); ++s) {
    for (std::size_t d = 0; d < 32; ++d) {
      CHECK(std::abs(za[s][1 * 32 + d] - zb[s][2 * 32 + d]) < 1e-12);
      CHECK(std::abs(za[s][2 * 32 + d] - zb[s][1 * 32 + d]) < 1e-12);
    }
  }
}

TEST_CASE("segmentation and latents share one encoder pass") {
  std::mt19937_64 rng(14);
  const ModelParams p = init_params(NetConfig{}, 2);
  ad::EvalStats stats;
  const NetOutputs out = forward(p, random_image(rng, 64, 128), PatchGrid(64, 128, 16, 32), &stats);
  CHECK(stats.count(ad::Op::kConv2d) == 4);  // three encoder stages + 1x1 head
  CHECK(out.latents.size() == 2);
  CHECK(out.probs.shape() == Shape{5, 64, 128});
}

TEST_CASE("checkpoints round-trip and reject damage") {
  const ModelParams p = init_params(NetConfig{}, 21);
  const std::string path = temp_path("model.ckpt");
  save_checkpoint(path, p);
  const ModelParams q = load_checkpoint(path);
  CHECK(q.tensors == p.tensors);
  CHECK(q.config.hash() == p.config.hash());

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto expect_format_error = [&](const std::string& content) {
    std::ofstream(path, std::ios::binary) << content;
    try {
      load_checkpoint(path);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFormat);
    }
  };
  expect_format_error(bytes.substr(0, bytes.size() / 2));
  expect_format_error("NOTACKPT" + bytes.substr(8));
  std::string tampered = bytes;
  tampered[12] ^= 0x5a;  // config hash
  expect_format_error(tampered);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}
