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

// Reverse-mode automatic differentiation over a static operation graph.
//
// A Graph is built once (node shapes are inferred at construction, so shape
// errors surface while building and name the offending node), then evaluated
// any number of times against name->Tensor bindings for its parameter and
// input leaves. Nodes are appended in topological order by construction.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segda/tensor.hpp"

namespace segda::ad {

using NodeId = std::size_t;

enum class Op : int {
  kParameter,
  kInput,
  kConstant,
  kRelu,
  kLog,
  kExp,
  kPow,         // x^p, scalar exponent
  kScale,       // c * x
  kAddScalar,   // x + c
  kAdd,
  kSub,
  kMul,
  kDiv,
  kBiasAdd,     // [C,H,W] + b[C] per channel, or [N,C] + b[C] per row
  kConv2d,      // x[Ci,H,W] * w[Co,Ci,k,k], zero padding
  kMatmul,      // [M,K] x [K,N]
  kPatchAvgPool,  // [C,H,W] -> [rows*cols, C]
  kUpsample,    // bilinear, half-pixel centers
  kSoftmax,
  kLogSoftmax,
  kSum,         // -> [1]
  kMean,        // -> [1]
  kSumAxis,
  kReshape,
  kGatherRows,  // [N,D] -> [M,D]
  kL2NormalizeRows,
  kRowDot,      // [M,D],[M,D] -> [M]
  kPick,        // [N,K] -> [N], one column per row
  kCount_,
};

const char* op_name(Op op);

struct Attrs {
  double scalar = 0.0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t axis = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> indices;
};

struct Node {
  Op op = Op::kConstant;
  std::vector<NodeId> inputs;
  Attrs attrs;
  Shape shape;
  std::string name;  // leaves and user-named outputs
  Tensor constant;   // kConstant only
};

class Graph {
 public:
  // Leaves. parameter() and input() return the existing node when the name
  // is already declared with the same shape.
  NodeId parameter(const std::string& name, const Shape& shape);
  NodeId input(const std::string& name, const Shape& shape);
  NodeId constant(Tensor value);

  NodeId relu(NodeId x);
  NodeId log(NodeId x);
  NodeId exp(NodeId x);
  NodeId pow(NodeId x, double exponent);
  NodeId scale(NodeId x, double factor);
  NodeId add_scalar(NodeId x, double c);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId bias_add(NodeId x, NodeId bias);
  NodeId conv2d(NodeId x, NodeId weight, std::size_t stride, std::size_t pad);
  NodeId matmul(NodeId a, NodeId b);
  NodeId patch_avg_pool(NodeId x, std::size_t rows, std::size_t cols);
  NodeId upsample(NodeId x, std::size_t out_h, std::size_t out_w);
  NodeId softmax(NodeId x, std::size_t axis);
  NodeId log_softmax(NodeId x, std::size_t axis);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId sum_axis(NodeId x, std::size_t axis);
  NodeId reshape(NodeId x, const Shape& shape);
  NodeId gather_rows(NodeId x, std::vector<std::size_t> rows);
  NodeId l2_normalize_rows(NodeId x);
  NodeId row_dot(NodeId a, NodeId b);
  NodeId pick(NodeId x, std::vector<std::size_t> columns);

  void set_output(NodeId id);
  std::optional<NodeId> output() const { return output_; }
  void set_name(NodeId id, const std::string& name);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<NodeId> parameters() const;
  std::vector<NodeId> inputs() const;

 private:
  NodeId push(Node node);
  NodeId leaf(Op op, const std::string& name, const Shape& shape);
  const Shape& shape_of(NodeId id) const;
  [[noreturn]] void shape_error(const std::string& what) const;

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> leaves_;
  std::optional<NodeId> output_;
};

using Bindings = std::map<std::string, Tensor>;

struct EvalOptions {
  // Raise on any NaN/Inf produced by a node.
  bool check_finite = true;
};

// Per-op evaluation counters, filled by forward() when requested.
struct EvalStats {
  std::array<std::size_t, static_cast<std::size_t>(Op::kCount_)> op_counts{};
  std::size_t count(Op op) const { return op_counts[static_cast<std::size_t>(op)]; }
};

/// Values of every node, indexed by NodeId.
std::vector<Tensor> forward(const Graph& graph, const Bindings& bindings,
                            const EvalOptions& options = {}, EvalStats* stats = nullptr);

/// Values of every named node (leaves excluded).
std::map<std::string, Tensor> evaluate(const Graph& graph, const Bindings& bindings,
                                       const EvalOptions& options = {});

struct ForwardBackward {
  std::vector<Tensor> values;
  double output = 0.0;
  std::map<std::string, Tensor> gradients;  // per parameter leaf
};

/// Forward pass plus gradients of the scalar output w.r.t. every parameter.
ForwardBackward forward_backward(const Graph& graph, const Bindings& bindings,
                                 const EvalOptions& options = {});

std::map<std::string, Tensor> backward(const Graph& graph, const Bindings& bindings,
                                       const EvalOptions& options = {});

struct GradCheckOptions {
  std::size_t max_coords_per_leaf = 24;
  std::uint64_t seed = 7;
};

/// Max over sampled parameter coordinates of
/// |analytic - numeric| / max(1, |analytic|, |numeric|), central differences.
double grad_check(const Graph& graph, const Bindings& bindings, double eps,
                  const GradCheckOptions& options = {});

}  // namespace segda::ad
