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
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "segda/error.hpp"
#include "segda/pairing.hpp"

using namespace segda;

namespace {

using Vec = std::vector<double>;

std::vector<std::span<const double>> spans(const std::vector<Vec>& v) {
  return {v.begin(), v.end()};
}

Vec random_vec(std::mt19937_64& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> n(0, scale);
  Vec v(d);
  for (double& x : v) x = n(rng);
  return v;
}

DisparityMatrix matrix(std::size_t rows, std::size_t cols, std::vector<double> v) { return {rows, cols, std::move(v)}; }

}  // namespace

TEST_CASE("mining on identical maps pairs each patch with itself") {
  const PatchGrid grid(32, 64, 8, 16);
  LabelMap m(32, 64, 0);
  // Every patch gets a distinct ordered pair of classes (left half, right
  // half), so the diagonal is the unique zero of each row.
  std::vector<std::pair<std::uint8_t, std::uint8_t>> combos;
  for (std::uint8_t l = 0; l < 5; ++l) {
    for (std::uint8_t r = 0; r < 5; ++r) {
      if (l != r) combos.emplace_back(l, r);
    }
  }
  for (std::size_t p = 0; p < 16; ++p) {
    const Rect r = grid.image_rect(p);
    for (std::size_t y = 0; y < r.h; ++y) {
      for (std::size_t x = 0; x < r.w; ++x) m.at(r.y0 + y, r.x0 + x) = x < r.w / 2 ? combos[p].first : combos[p].second;
    }
  }
  const DisparityMatrix d = disparity_matrix(m, m, grid, 5);
  const auto pairs = mine_pairs(d, 3, 70, 1, 5);
  CHECK(pairs.size() == 16);
  for (const MinedPair& p : pairs) {
    CHECK(p.positive == p.query);
    CHECK(p.positive_disparity == 0.0);
  }
  CHECK(!pairs.empty());
}

TEST_CASE("ignored band yields no pairs") {
  const auto d = matrix(4, 4, std::vector<double>(16, 50.0));
  CHECK(mine_pairs(d, 3, 70, 1, 1).empty());
  CHECK_THROWS_AS(mine_pairs(d, 70, 3, 1, 1), Error);
  CHECK_THROWS_AS(mine_pairs(d, 3, 70, 0, 1), Error);
  CHECK_THROWS_AS(mine_pairs(d, -1, 70, 1, 1), Error);
}

TEST_CASE("mined pairs agree with an exhaustive threshold scan") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 96);
  for (int t = 0; t < 200; ++t) {
    const std::size_t rows = 1 + rng() % 12, cols = 1 + rng() % 20;
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng() % 4 == 0 ? std::floor(u(rng) / 8) : u(rng);  // ties and small values
    const auto d = matrix(rows, cols, v);
    const std::size_t k = 1 + rng() % 4;
    const double alpha = 3, beta = 70;
    const auto pairs = mine_pairs(d, alpha, beta, k, t);

    std::vector<std::size_t> expected_queries;
    for (std::size_t i = 0; i < rows; ++i) {
      std::size_t neg = 0, best = cols;
      for (std::size_t j = 0; j < cols; ++j) {
        if (d.at(i, j) > beta) ++neg;
        if (d.at(i, j) < alpha && (best == cols || d.at(i, j) < d.at(i, best))) best = j;
      }
      if (best < cols && neg >= k) expected_queries.push_back(i);
    }
    REQUIRE(pairs.size() == expected_queries.size());
    for (std::size_t n = 0; n < pairs.size(); ++n) {
      const MinedPair& p = pairs[n];
      CHECK(p.query == expected_queries[n]);
      std::size_t best = cols;
      for (std::size_t j = 0; j < cols; ++j) {
        if (d.at(p.query, j) < alpha && (best == cols || d.at(p.query, j) < d.at(p.query, best))) best = j;
      }
      CHECK(p.positive == best);
      CHECK(p.positive_disparity == d.at(p.query, p.positive));
      CHECK(p.negatives.size() == k);
      std::set<std::size_t> unique(p.negatives.begin(), p.negatives.end());
      CHECK(unique.size() == k);
      for (std::size_t j : p.negatives) CHECK(d.at(p.query, j) > beta);
    }
    CHECK(mine_pairs(d, alpha, beta, k, t).size() == pairs.size());
  }
}

TEST_CASE("negative sampling is seeded and covers the candidates") {
  std::vector<double> v(1 * 10, 90.0);
  v[0] = 0.0;
  const auto d = matrix(1, 10, v);
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = mine_pairs(d, 3, 70, 2, s), b = mine_pairs(d, 3, 70, 2, s);
    CHECK(a[0].negatives == b[0].negatives);
    seen.insert(a[0].negatives.begin(), a[0].negatives.end());
  }
  CHECK(seen.size() == 9);
}

TEST_CASE("contrastive loss closed forms") {
  const Vec q{0.3, -1.2, 0.5};
  const std::vector<Vec> same(8, q);
  CHECK(contrastive_loss(q, q, spans(same), 0.07) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
  CHECK(std::abs(contrastive_loss(q, q, spans(same), 0.07) - 2.1972245773362196) < 1e-12);

  const Vec e1{1, 0}, e2{0, 1};
  const std::vector<Vec> neg{e2};
  const double expected = std::log1p(std::exp(-1.0 / 0.07));
  CHECK(std::abs(contrastive_loss(e1, e1, spans(neg), 0.07) - expected) < 1e-15);
  CHECK(expected == doctest::Approx(6.2e-7).epsilon(0.01));

  const Vec zero{0, 0};
  CHECK_THROWS_AS(contrastive_loss(zero, e1, spans(neg), 0.07), Error);
  CHECK_THROWS_AS(contrastive_loss(e1, e1, spans(neg), 0.0), Error);
}

TEST_CASE("stable and ratio forms agree; rescaling changes nothing") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.1, 10);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 2 + rng() % 30, k = 1 + rng() % 10;
    const Vec q = random_vec(rng, d), p = random_vec(rng, d);
    std::vector<Vec> negs;
    for (std::size_t i = 0; i < k; ++i) negs.push_back(random_vec(rng, d));
    const double tau = 0.07 + 0.5 * (rng() % 3);
    const double stable = contrastive_loss(q, p, spans(negs), tau);
    CHECK(std::abs(stable - contrastive_loss_ratio_form(q, p, spans(negs), tau)) < 1e-9);
    CHECK(stable >= 0.0);

    Vec qs = q, ps = p;
    const double a = scale(rng), b = scale(rng);
    for (double& x : qs) x *= a;
    for (double& x : ps) x *= b;
    std::vector<Vec> ns = negs;
    for (auto& n : ns) {
      const double c = scale(rng);
      for (double& x : n) x *= c;
    }
    CHECK(std::abs(contrastive_loss(qs, ps, spans(ns), tau) - stable) < 1e-9);
  }
}

TEST_CASE("loss decreases with positive similarity and increases with negative similarity") {
  const Vec q{1, 0};
  const std::vector<Vec> negs{{0, 1}, {-1, 0.2}};
  double prev = 1e9;
  for (double ang = 3.0; ang >= 0; ang -= 0.25) {
    const Vec p{std::cos(ang), std::sin(ang)};
    const double l = contrastive_loss(q, p, spans(negs), 0.1);
    CHECK(l < prev);
    prev = l;
  }
  const Vec p{0.8, 0.6};
  prev = -1;
  for (double ang = 3.0; ang >= 0; ang -= 0.25) {
    const std::vector<Vec> n{{std::cos(ang), std::sin(ang)}, {0, 1}};
    const double l = contrastive_loss(q, p, spans(n), 0.1);
    CHECK(l > prev);
    prev = l;
  }
}

TEST_CASE("graph form matches the scalar form and its gradients") {
  std::mt19937_64 rng(4);
  const std::size_t nq = 5, nk = 7, d = 6;
  ad::Graph g;
  const auto q = g.parameter("q", {nq, d});
  const auto k = g.parameter("k", {nk, d});
  std::vector<MinedPair> pairs = {{0, 2, {1, 4, 5}, 0.0}, {3, 0, {2, 6, 1}, 1.0}, {4, 4, {0, 3, 6}, 2.0}};
  const double tau = 0.07;
  g.set_output(contrastive_loss_node(g, q, k, pairs, tau));
  const ad::Bindings b{{"q", oracle::random_tensor(rng, {nq, d})}, {"k", oracle::random_tensor(rng, {nk, d})}};

  auto row = [&](const char* name, std::size_t r) {
    const Tensor& t = b.at(name);
    return Vec(t.values().begin() + r * d, t.values().begin() + (r + 1) * d);
  };
  double expected = 0;
  for (const MinedPair& p : pairs) {
    std::vector<Vec> negs;
    for (std::size_t n : p.negatives) negs.push_back(row("k", n));
    expected += contrastive_loss(row("q", p.query), row("k", p.positive), spans(negs), tau);
  }
  const auto fb = ad::forward_backward(g, b);
  CHECK(std::abs(fb.output - expected) < 1e-9);
  CHECK(oracle::fd_error(g, b, fb.gradients) < 1e-4);
  CHECK(ad::grad_check(g, b, 1e-5) < 1e-4);
}

TEST_CASE("pair sets serialize line by line") {
  const std::vector<MinedPair> mined = {{0, 2, {1, 4}, 0.5}, {3, 0, {2, 6}, 1.25}};
  const auto sets = to_pair_sets(mined, 7, Domain::kTarget, 9, Domain::kSource, LabelSource::kPseudo);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].query.image == 7);
  CHECK(sets[0].positive.image == 9);
  CHECK(sets[1].negatives[1].patch == 6);
  std::stringstream ss;
  write_pair_sets(ss, sets);
  CHECK(ss.str().substr(0, ss.str().find('\n')) == "7,0,9,2,1,4,0.5,PSEUDO");
  const auto back = read_pair_sets(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].disparity == 1.25);
  CHECK(back[1].source == LabelSource::kPseudo);
  CHECK(back[1].negatives.size() == 2);
  std::stringstream bad("1,2,3\n");
  CHECK_THROWS_AS(read_pair_sets(bad), Error);
}
