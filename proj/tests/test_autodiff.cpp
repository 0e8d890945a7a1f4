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
#include <functional>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "segda/autodiff.hpp"
#include "segda/error.hpp"

using namespace segda;
using ad::Graph;
using ad::NodeId;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kState;
}

// Builds `body(g, x)` on a parameter x of `shape`, reduces with a weighted sum
// so every output coordinate gets a distinct gradient, and compares against
// central differences.
double op_fd_error(const Shape& shape, const std::function<NodeId(Graph&, NodeId)>& body, std::uint64_t seed,
                   double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  Graph g;
  const NodeId x = g.parameter("x", shape);
  const NodeId y = body(g, x);
  const Shape ys = g.node(y).shape;
  const NodeId w = g.constant(oracle::random_tensor(rng, ys));
  g.set_output(g.sum(g.mul(y, w)));
  ad::Bindings b{{"x", oracle::random_tensor(rng, shape, lo, hi)}};
  for (NodeId p : g.parameters()) {
    const auto& n = g.node(p);
    if (!b.count(n.name)) b.emplace(n.name, oracle::random_tensor(rng, n.shape));
  }
  return oracle::fd_error(g, b, ad::backward(g, b));
}

}  // namespace

TEST_CASE("relu, softmax and identity convolution") {
  Graph g;
  const NodeId x = g.input("x", {3});
  const NodeId r = g.relu(x);
  auto v = ad::forward(g, {{"x", Tensor({3}, {-1, 0, 2})}});
  CHECK(v[r].values() == std::vector<double>{0, 0, 2});

  Graph s;
  const NodeId z = s.input("z", {2});
  const NodeId sm = s.softmax(z, 0);
  auto sv = ad::forward(s, {{"z", Tensor({2}, {0, 0})}});
  CHECK(sv[sm][0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sv[sm][1] == doctest::Approx(0.5).epsilon(1e-15));

  std::mt19937_64 rng(3);
  Graph c;
  const NodeId img = c.input("img", {3, 5, 7});
  const NodeId k = c.constant([] {
    Tensor t({3, 3, 1, 1});
    for (std::size_t i = 0; i < 3; ++i) t[i * 3 + i] = 1.0;
    return t;
  }());
  const NodeId conv = c.conv2d(img, k, 1, 0);
  const Tensor in = oracle::random_tensor(rng, {3, 5, 7});
  CHECK(ad::forward(c, {{"img", in}})[conv] == in);
}

TEST_CASE("softmax slices are normalized") {
  std::mt19937_64 rng(11);
  Graph g;
  const NodeId x = g.input("x", {4, 3, 5});
  const NodeId s = g.softmax(x, 0);
  const auto v = ad::forward(g, {{"x", oracle::random_tensor(rng, {4, 3, 5}, -30, 30)}})[s];
  for (std::size_t p = 0; p < 15; ++p) {
    double total = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(v[c * 15 + p] >= 0.0);
      total += v[c * 15 + p];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("backward basics") {
  Graph g;
  const NodeId x = g.parameter("x", {2});
  g.set_output(g.sum(g.mul(x, x)));
  const auto grads = ad::backward(g, {{"x", Tensor({2}, {1, 2})}});
  CHECK(grads.at("x").values() == std::vector<double>{2, 4});

  Graph c;
  const NodeId p = c.parameter("p", {3});
  const NodeId unused = c.parameter("unused", {2, 2});
  (void)p;
  (void)unused;
  c.set_output(c.sum(c.constant(Tensor({2}, {1, 5}))));
  const auto zero = ad::backward(c, {{"p", Tensor({3}, 1.0)}, {"unused", Tensor({2, 2}, 3.0)}});
  CHECK(zero.at("p") == Tensor({3}));
  CHECK(zero.at("unused") == Tensor({2, 2}));
}

TEST_CASE("conv + relu + sum gradients match finite differences") {
  std::mt19937_64 rng(5);
  Graph g;
  const NodeId x = g.parameter("x", {2, 6, 7});
  const NodeId w = g.parameter("w", {3, 2, 3, 3});
  const NodeId b = g.parameter("b", {3});
  g.set_output(g.sum(g.relu(g.bias_add(g.conv2d(x, w, 2, 1), b))));
  ad::Bindings bind{{"x", oracle::random_tensor(rng, {2, 6, 7})},
                    {"w", oracle::random_tensor(rng, {3, 2, 3, 3})},
                    {"b", oracle::random_tensor(rng, {3}, -0.1, 0.1)}};
  CHECK(oracle::fd_error(g, bind, ad::backward(g, bind)) < 1e-4);
}

TEST_CASE("every op agrees with central differences") {
  using B = std::function<NodeId(Graph&, NodeId)>;
  struct Case {
    const char* name;
    Shape shape;
    B body;
    double lo = -1, hi = 1;
  };
  const std::vector<Case> cases = {
      {"relu", {7}, [](Graph& g, NodeId x) { return g.relu(x); }},
      {"log", {6}, [](Graph& g, NodeId x) { return g.log(x); }, 0.5, 2.0},
      {"exp", {6}, [](Graph& g, NodeId x) { return g.exp(x); }},
      {"pow", {6}, [](Graph& g, NodeId x) { return g.pow(x, 2.5); }, 0.5, 2.0},
      {"scale", {4}, [](Graph& g, NodeId x) { return g.scale(x, -3.0); }},
      {"add_scalar", {4}, [](Graph& g, NodeId x) { return g.add_scalar(x, 2.0); }},
      {"add", {2, 3}, [](Graph& g, NodeId x) { return g.add(x, g.parameter("y", {2, 3})); }},
      {"sub", {2, 3}, [](Graph& g, NodeId x) { return g.sub(g.parameter("y", {2, 3}), x); }},
      {"mul", {2, 3}, [](Graph& g, NodeId x) { return g.mul(x, g.parameter("y", {2, 3})); }},
      {"div", {2, 3}, [](Graph& g, NodeId x) { return g.div(g.parameter("y", {2, 3}), x); }, 0.5, 2.0},
      {"bias_add chw", {3, 2, 2}, [](Graph& g, NodeId x) { return g.bias_add(x, g.parameter("b", {3})); }},
      {"bias_add rows", {4, 3}, [](Graph& g, NodeId x) { return g.bias_add(x, g.parameter("b", {3})); }},
      {"conv2d stride 2", {2, 5, 6}, [](Graph& g, NodeId x) { return g.conv2d(x, g.parameter("w", {3, 2, 3, 3}), 2, 1); }},
      {"conv2d 1x1", {3, 4, 4}, [](Graph& g, NodeId x) { return g.conv2d(x, g.parameter("w", {2, 3, 1, 1}), 1, 0); }},
      {"matmul", {3, 4}, [](Graph& g, NodeId x) { return g.matmul(x, g.parameter("w", {4, 2})); }},
      {"patch_avg_pool", {2, 4, 6}, [](Graph& g, NodeId x) { return g.patch_avg_pool(x, 2, 3); }},
      {"upsample", {2, 3, 4}, [](Graph& g, NodeId x) { return g.upsample(x, 7, 9); }},
      {"softmax", {4, 2, 3}, [](Graph& g, NodeId x) { return g.softmax(x, 0); }},
      {"softmax axis 1", {3, 4}, [](Graph& g, NodeId x) { return g.softmax(x, 1); }},
      {"log_softmax", {3, 5}, [](Graph& g, NodeId x) { return g.log_softmax(x, 1); }},
      {"sum", {3, 2}, [](Graph& g, NodeId x) { return g.sum(x); }},
      {"mean", {3, 2}, [](Graph& g, NodeId x) { return g.mean(x); }},
      {"sum_axis", {3, 4, 2}, [](Graph& g, NodeId x) { return g.sum_axis(x, 1); }},
      {"reshape", {3, 4}, [](Graph& g, NodeId x) { return g.reshape(x, {2, 6}); }},
      {"gather_rows", {4, 3}, [](Graph& g, NodeId x) { return g.gather_rows(x, {2, 0, 2, 3}); }},
      {"l2_normalize_rows", {3, 4}, [](Graph& g, NodeId x) { return g.l2_normalize_rows(x); }},
      {"row_dot", {3, 4}, [](Graph& g, NodeId x) { return g.row_dot(x, g.parameter("y", {3, 4})); }},
      {"pick", {3, 4}, [](Graph& g, NodeId x) { return g.pick(x, {1, 3, 0}); }},
  };
  std::uint64_t seed = 100;
  for (const Case& c : cases) {
    CAPTURE(c.name);
    CHECK(op_fd_error(c.shape, c.body, seed++, c.lo, c.hi) < 1e-4);
  }
}

TEST_CASE("grad_check") {
  Graph g;
  const NodeId x = g.parameter("x", {5});
  g.set_output(g.sum(g.add(g.mul(x, x), g.scale(x, 3.0))));
  std::mt19937_64 rng(2);
  const ad::Bindings b{{"x", oracle::random_tensor(rng, {5})}};
  CHECK(ad::grad_check(g, b, 1e-5) < 1e-7);
  CHECK(code_of([&] { ad::grad_check(g, b, 0.0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { ad::grad_check(g, b, 0.02); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("errors") {
  SUBCASE("shape mismatch names the node") {
    Graph g;
    const NodeId a = g.input("a", {2, 3});
    const NodeId b = g.input("b", {3, 2});
    try {
      g.add(a, b);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kShapeMismatch);
      CHECK(std::string(e.what()).find("node #2") != std::string::npos);
    }
    CHECK(code_of([&] { g.matmul(a, a); }) == ErrorCode::kShapeMismatch);
  }
  SUBCASE("non-finite intermediate reports the node") {
    Graph g;
    const NodeId x = g.input("x", {2});
    const NodeId l = g.log(x);
    g.set_name(l, "logx");
    try {
      ad::forward(g, {{"x", Tensor({2}, {1.0, -1.0})}});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNonFinite);
      CHECK(std::string(e.what()).find("logx") != std::string::npos);
    }
    ad::EvalOptions off;
    off.check_finite = false;
    CHECK(std::isnan(ad::forward(g, {{"x", Tensor({2}, {1.0, -1.0})}}, off)[l][1]));
  }
  SUBCASE("non-scalar output") {
    Graph g;
    const NodeId x = g.parameter("x", {2});
    g.set_output(g.relu(x));
    CHECK(code_of([&] { ad::backward(g, {{"x", Tensor({2}, 1.0)}}); }) == ErrorCode::kShapeMismatch);
  }
  SUBCASE("unbound leaf") {
    Graph g;
    const NodeId x = g.input("x", {2});
    g.set_output(g.sum(x));
    CHECK_THROWS_AS(ad::forward(g, {}), Error);
    CHECK_THROWS_AS(ad::forward(g, {{"x", Tensor({3})}}), Error);
  }
  SUBCASE("zero-norm row") {
    Graph g;
    const NodeId x = g.input("x", {2, 2});
    g.l2_normalize_rows(x);
    CHECK(code_of([&] { ad::forward(g, {{"x", Tensor({2, 2}, {1, 0, 0, 0})}}); }) == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("evaluation is pure and leaves are shared by name") {
  std::mt19937_64 rng(9);
  Graph g;
  const NodeId x = g.input("x", {2, 4, 4});
  CHECK(g.input("x", {2, 4, 4}) == x);
  CHECK_THROWS_AS(g.input("x", {2, 4, 5}), Error);
  const NodeId w = g.parameter("w", {3, 2, 3, 3});
  const NodeId y = g.softmax(g.conv2d(x, w, 1, 1), 0);
  g.set_name(y, "probs");
  const ad::Bindings b{{"x", oracle::random_tensor(rng, {2, 4, 4})}, {"w", oracle::random_tensor(rng, {3, 2, 3, 3})}};
  const auto first = ad::evaluate(g, b);
  const auto second = ad::evaluate(g, b);
  REQUIRE(first.count("probs") == 1);
  CHECK(first.at("probs") == second.at("probs"));
}
