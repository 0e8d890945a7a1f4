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

#include "segda/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <set>

#include "segda/error.hpp"
#include "segda/rng.hpp"

namespace segda::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Rows (ci, ky, kx), columns (oy, ox).
void im2col(const double* x, std::size_t ci_n, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* cols) {
  const std::size_t p_n = ho * wo;
  for (std::size_t ci = 0; ci < ci_n; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((ci * k + ky) * k + kx) * p_n;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          double* out = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(out, out + wo, 0.0);
            continue;
          }
          const double* src = x + (ci * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t ci_n, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* dx) {
  const std::size_t p_n = ho * wo;
  for (std::size_t ci = 0; ci < ci_n; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((ci * k + ky) * k + kx) * p_n;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = dx + (ci * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

// Bilinear sampling taps along one axis, half-pixel centers, edge clamped.
struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

Taps make_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    t.lo[o] = i0;
    t.hi[o] = std::min(i0 + 1, in - 1);
    t.frac[o] = src - static_cast<double>(i0);
  }
  return t;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kParameter: return "parameter";
    case Op::kInput: return "input";
    case Op::kConstant: return "constant";
    case Op::kRelu: return "relu";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kPow: return "pow";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kBiasAdd: return "bias_add";
    case Op::kConv2d: return "conv2d";
    case Op::kMatmul: return "matmul";
    case Op::kPatchAvgPool: return "patch_avg_pool";
    case Op::kUpsample: return "upsample";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSumAxis: return "sum_axis";
    case Op::kReshape: return "reshape";
    case Op::kGatherRows: return "gather_rows";
    case Op::kL2NormalizeRows: return "l2_normalize_rows";
    case Op::kRowDot: return "row_dot";
    case Op::kPick: return "pick";
    case Op::kCount_: break;
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph construction

void Graph::shape_error(const std::string& what) const {
  fail(ErrorCode::kShapeMismatch, "node #" + std::to_string(nodes_.size()) + ": " + what);
}

const Shape& Graph::shape_of(NodeId id) const {
  if (id >= nodes_.size()) {
    fail(ErrorCode::kInvalidArgument,
         "node #" + std::to_string(nodes_.size()) + ": input id " + std::to_string(id) + " does not exist");
  }
  return nodes_[id].shape;
}

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) shape_of(in);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

NodeId Graph::leaf(Op op, const std::string& name, const Shape& shape) {
  if (auto it = leaves_.find(name); it != leaves_.end()) {
    const Node& existing = nodes_[it->second];
    if (existing.op != op || existing.shape != shape) {
      shape_error("leaf '" + name + "' redeclared with a different kind or shape " + shape_string(shape));
    }
    return it->second;
  }
  if (shape.empty() || shape_size(shape) == 0) shape_error("leaf '" + name + "' has an empty shape");
  Node n;
  n.op = op;
  n.shape = shape;
  n.name = name;
  const NodeId id = push(std::move(n));
  leaves_[name] = id;
  return id;
}

NodeId Graph::parameter(const std::string& name, const Shape& shape) { return leaf(Op::kParameter, name, shape); }
NodeId Graph::input(const std::string& name, const Shape& shape) { return leaf(Op::kInput, name, shape); }

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.shape = value.shape();
  n.constant = std::move(value);
  return push(std::move(n));
}

namespace {
Node unary(Op op, NodeId x, const Shape& shape, double scalar = 0.0) {
  Node n;
  n.op = op;
  n.inputs = {x};
  n.shape = shape;
  n.attrs.scalar = scalar;
  return n;
}
}  // namespace

NodeId Graph::relu(NodeId x) { return push(unary(Op::kRelu, x, shape_of(x))); }
NodeId Graph::log(NodeId x) { return push(unary(Op::kLog, x, shape_of(x))); }
NodeId Graph::exp(NodeId x) { return push(unary(Op::kExp, x, shape_of(x))); }
NodeId Graph::pow(NodeId x, double p) { return push(unary(Op::kPow, x, shape_of(x), p)); }
NodeId Graph::scale(NodeId x, double c) { return push(unary(Op::kScale, x, shape_of(x), c)); }
NodeId Graph::add_scalar(NodeId x, double c) { return push(unary(Op::kAddScalar, x, shape_of(x), c)); }

namespace {
Node binary(Op op, NodeId a, NodeId b, const Shape& shape) {
  Node n;
  n.op = op;
  n.inputs = {a, b};
  n.shape = shape;
  return n;
}
}  // namespace

#define SEGDA_ELEMENTWISE(fn, kind)                                                           \
  NodeId Graph::fn(NodeId a, NodeId b) {                                                      \
    const Shape& sa = shape_of(a);                                                            \
    const Shape& sb = shape_of(b);                                                            \
    if (sa != sb) shape_error(std::string(op_name(kind)) + ": operand shapes " +              \
                              shape_string(sa) + " and " + shape_string(sb) + " differ");     \
    return push(binary(kind, a, b, sa));                                                      \
  }
SEGDA_ELEMENTWISE(add, Op::kAdd)
SEGDA_ELEMENTWISE(sub, Op::kSub)
SEGDA_ELEMENTWISE(mul, Op::kMul)
SEGDA_ELEMENTWISE(div, Op::kDiv)
#undef SEGDA_ELEMENTWISE

NodeId Graph::bias_add(NodeId x, NodeId bias) {
  const Shape& sx = shape_of(x);
  const Shape& sb = shape_of(bias);
  const std::size_t channel_axis = sx.size() == 3 ? 0 : 1;
  if ((sx.size() != 3 && sx.size() != 2) || sb.size() != 1 || sb[0] != sx[channel_axis]) {
    shape_error("bias_add: bias " + shape_string(sb) + " incompatible with " + shape_string(sx));
  }
  return push(binary(Op::kBiasAdd, x, bias, sx));
}

NodeId Graph::conv2d(NodeId x, NodeId weight, std::size_t stride, std::size_t pad) {
  const Shape& sx = shape_of(x);
  const Shape& sw = shape_of(weight);
  if (sx.size() != 3 || sw.size() != 4 || sw[1] != sx[0] || sw[2] != sw[3] || stride == 0) {
    shape_error("conv2d: input " + shape_string(sx) + " incompatible with weight " + shape_string(sw));
  }
  const std::size_t k = sw[2];
  if (sx[1] + 2 * pad < k || sx[2] + 2 * pad < k) shape_error("conv2d: kernel larger than padded input");
  Node n = binary(Op::kConv2d, x, weight, {sw[0], conv_out(sx[1], k, stride, pad), conv_out(sx[2], k, stride, pad)});
  n.attrs.stride = stride;
  n.attrs.pad = pad;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Shape& sa = shape_of(a);
  const Shape& sb = shape_of(b);
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    shape_error("matmul: " + shape_string(sa) + " x " + shape_string(sb));
  }
  return push(binary(Op::kMatmul, a, b, {sa[0], sb[1]}));
}

NodeId Graph::patch_avg_pool(NodeId x, std::size_t rows, std::size_t cols) {
  const Shape& sx = shape_of(x);
  if (sx.size() != 3 || rows == 0 || cols == 0 || sx[1] % rows != 0 || sx[2] % cols != 0) {
    shape_error("patch_avg_pool: " + shape_string(sx) + " not divisible into " + std::to_string(rows) + "x" +
                std::to_string(cols) + " patches");
  }
  Node n = unary(Op::kPatchAvgPool, x, {rows * cols, sx[0]});
  n.attrs.rows = rows;
  n.attrs.cols = cols;
  return push(std::move(n));
}

NodeId Graph::upsample(NodeId x, std::size_t out_h, std::size_t out_w) {
  const Shape& sx = shape_of(x);
  if (sx.size() != 3 || out_h == 0 || out_w == 0) shape_error("upsample: input must be [C,H,W]");
  Node n = unary(Op::kUpsample, x, {sx[0], out_h, out_w});
  n.attrs.rows = out_h;
  n.attrs.cols = out_w;
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId x, std::size_t axis) {
  const Shape& sx = shape_of(x);
  if (axis >= sx.size()) shape_error("softmax: axis out of range for " + shape_string(sx));
  Node n = unary(Op::kSoftmax, x, sx);
  n.attrs.axis = axis;
  return push(std::move(n));
}

NodeId Graph::log_softmax(NodeId x, std::size_t axis) {
  const Shape& sx = shape_of(x);
  if (axis >= sx.size()) shape_error("log_softmax: axis out of range for " + shape_string(sx));
  Node n = unary(Op::kLogSoftmax, x, sx);
  n.attrs.axis = axis;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) { return push(unary(Op::kSum, x, {1})); }
NodeId Graph::mean(NodeId x) { return push(unary(Op::kMean, x, {1})); }

NodeId Graph::sum_axis(NodeId x, std::size_t axis) {
  const Shape& sx = shape_of(x);
  if (axis >= sx.size()) shape_error("sum_axis: axis out of range for " + shape_string(sx));
  Shape out;
  for (std::size_t i = 0; i < sx.size(); ++i) {
    if (i != axis) out.push_back(sx[i]);
  }
  if (out.empty()) out = {1};
  Node n = unary(Op::kSumAxis, x, out);
  n.attrs.axis = axis;
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, const Shape& shape) {
  const Shape& sx = shape_of(x);
  if (shape_size(sx) != shape_size(shape) || shape.empty()) {
    shape_error("reshape: " + shape_string(sx) + " -> " + shape_string(shape));
  }
  return push(unary(Op::kReshape, x, shape));
}

NodeId Graph::gather_rows(NodeId x, std::vector<std::size_t> rows) {
  const Shape& sx = shape_of(x);
  if (sx.size() != 2 || rows.empty()) shape_error("gather_rows: input must be [N,D] and rows non-empty");
  for (std::size_t r : rows) {
    if (r >= sx[0]) shape_error("gather_rows: row " + std::to_string(r) + " out of range " + shape_string(sx));
  }
  Node n = unary(Op::kGatherRows, x, {rows.size(), sx[1]});
  n.attrs.indices = std::move(rows);
  return push(std::move(n));
}

NodeId Graph::l2_normalize_rows(NodeId x) {
  const Shape& sx = shape_of(x);
  if (sx.size() != 2) shape_error("l2_normalize_rows: input must be [N,D]");
  return push(unary(Op::kL2NormalizeRows, x, sx));
}

NodeId Graph::row_dot(NodeId a, NodeId b) {
  const Shape& sa = shape_of(a);
  const Shape& sb = shape_of(b);
  if (sa.size() != 2 || sa != sb) shape_error("row_dot: " + shape_string(sa) + " vs " + shape_string(sb));
  return push(binary(Op::kRowDot, a, b, {sa[0]}));
}

NodeId Graph::pick(NodeId x, std::vector<std::size_t> columns) {
  const Shape& sx = shape_of(x);
  if (sx.size() != 2 || columns.size() != sx[0]) shape_error("pick: need one column per row of " + shape_string(sx));
  for (std::size_t c : columns) {
    if (c >= sx[1]) shape_error("pick: column " + std::to_string(c) + " out of range");
  }
  Node n = unary(Op::kPick, x, {sx[0]});
  n.attrs.indices = std::move(columns);
  return push(std::move(n));
}

void Graph::set_output(NodeId id) {
  if (id >= nodes_.size()) fail(ErrorCode::kInvalidArgument, "set_output: unknown node " + std::to_string(id));
  output_ = id;
}

void Graph::set_name(NodeId id, const std::string& name) {
  if (id >= nodes_.size()) fail(ErrorCode::kInvalidArgument, "set_name: unknown node " + std::to_string(id));
  nodes_[id].name = name;
}

std::vector<NodeId> Graph::parameters() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::kParameter) out.push_back(i);
  }
  return out;
}

std::vector<NodeId> Graph::inputs() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::kInput) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

[[noreturn]] void node_error(ErrorCode code, NodeId id, const Node& n, const std::string& what) {
  fail(code, "node #" + std::to_string(id) + " (" + op_name(n.op) + (n.name.empty() ? "" : " '" + n.name + "'") +
                 "): " + what);
}

Tensor eval_node(NodeId id, const Node& n, const std::vector<Tensor>& v, const Bindings& bindings) {
  switch (n.op) {
    case Op::kParameter:
    case Op::kInput: {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) node_error(ErrorCode::kInvalidArgument, id, n, "leaf is not bound");
      if (it->second.shape() != n.shape) {
        node_error(ErrorCode::kShapeMismatch, id, n,
                   "bound shape " + shape_string(it->second.shape()) + " != declared " + shape_string(n.shape));
      }
      return it->second;
    }
    case Op::kConstant:
      return n.constant;
    default:
      break;
  }

  Tensor out(n.shape);
  double* y = out.data().data();
  const std::size_t size = out.size();
  const Tensor& a = v[n.inputs[0]];
  const double* x = a.data().data();

  switch (n.op) {
    case Op::kRelu:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < size; ++i) y[i] = std::log(x[i]);
      break;
    case Op::kExp:
      for (std::size_t i = 0; i < size; ++i) y[i] = std::exp(x[i]);
      break;
    case Op::kPow:
      for (std::size_t i = 0; i < size; ++i) y[i] = std::pow(x[i], n.attrs.scalar);
      break;
    case Op::kScale:
      for (std::size_t i = 0; i < size; ++i) y[i] = n.attrs.scalar * x[i];
      break;
    case Op::kAddScalar:
      for (std::size_t i = 0; i < size; ++i) y[i] = x[i] + n.attrs.scalar;
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const double* b = v[n.inputs[1]].data().data();
      if (n.op == Op::kAdd) {
        for (std::size_t i = 0; i < size; ++i) y[i] = x[i] + b[i];
      } else if (n.op == Op::kSub) {
        for (std::size_t i = 0; i < size; ++i) y[i] = x[i] - b[i];
      } else if (n.op == Op::kMul) {
        for (std::size_t i = 0; i < size; ++i) y[i] = x[i] * b[i];
      } else {
        for (std::size_t i = 0; i < size; ++i) y[i] = x[i] / b[i];
      }
      break;
    }
    case Op::kBiasAdd: {
      const double* b = v[n.inputs[1]].data().data();
      if (n.shape.size() == 3) {
        const std::size_t plane = n.shape[1] * n.shape[2];
        for (std::size_t c = 0; c < n.shape[0]; ++c) {
          for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] = x[c * plane + i] + b[c];
        }
      } else {
        const std::size_t cols = n.shape[1];
        for (std::size_t r = 0; r < n.shape[0]; ++r) {
          for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = x[r * cols + c] + b[c];
        }
      }
      break;
    }
    case Op::kConv2d: {
      const Tensor& w = v[n.inputs[1]];
      const std::size_t ci = a.dim(0), h = a.dim(1), wd = a.dim(2);
      const std::size_t co = w.dim(0), k = w.dim(2);
      const std::size_t ho = n.shape[1], wo = n.shape[2];
      const std::size_t kk = ci * k * k, p = ho * wo;
      std::vector<double> cols(kk * p);
      im2col(x, ci, h, wd, k, n.attrs.stride, n.attrs.pad, ho, wo, cols.data());
      MapMat(y, co, p).noalias() = ConstMapMat(w.data().data(), co, kk) * ConstMapMat(cols.data(), kk, p);
      break;
    }
    case Op::kMatmul: {
      const Tensor& b = v[n.inputs[1]];
      MapMat(y, n.shape[0], n.shape[1]).noalias() =
          ConstMapMat(x, a.dim(0), a.dim(1)) * ConstMapMat(b.data().data(), b.dim(0), b.dim(1));
      break;
    }
    case Op::kPatchAvgPool: {
      const std::size_t c_n = a.dim(0), h = a.dim(1), w = a.dim(2);
      const std::size_t ph = h / n.attrs.rows, pw = w / n.attrs.cols;
      const double inv = 1.0 / static_cast<double>(ph * pw);
      for (std::size_t r = 0; r < n.attrs.rows; ++r) {
        for (std::size_t q = 0; q < n.attrs.cols; ++q) {
          const std::size_t patch = r * n.attrs.cols + q;
          for (std::size_t c = 0; c < c_n; ++c) {
            double acc = 0.0;
            for (std::size_t yy = r * ph; yy < (r + 1) * ph; ++yy) {
              const double* row = x + (c * h + yy) * w;
              for (std::size_t xx = q * pw; xx < (q + 1) * pw; ++xx) acc += row[xx];
            }
            y[patch * c_n + c] = acc * inv;
          }
        }
      }
      break;
    }
    case Op::kUpsample: {
      const std::size_t c_n = a.dim(0), ih = a.dim(1), iw = a.dim(2);
      const std::size_t oh = n.shape[1], ow = n.shape[2];
      const Taps ty = make_taps(ih, oh), tx = make_taps(iw, ow);
      for (std::size_t c = 0; c < c_n; ++c) {
        const double* src = x + c * ih * iw;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const double fy = ty.frac[oy];
          const double* r0 = src + ty.lo[oy] * iw;
          const double* r1 = src + ty.hi[oy] * iw;
          double* dst = y + (c * oh + oy) * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double fx = tx.frac[ox];
            const double top = r0[tx.lo[ox]] * (1.0 - fx) + r0[tx.hi[ox]] * fx;
            const double bot = r1[tx.lo[ox]] * (1.0 - fx) + r1[tx.hi[ox]] * fx;
            dst[ox] = top * (1.0 - fy) + bot * fy;
          }
        }
      }
      break;
    }
    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      const AxisSplit s = split_axis(n.shape, n.attrs.axis);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.len * s.inner + i;
          double mx = x[base];
          for (std::size_t j = 1; j < s.len; ++j) mx = std::max(mx, x[base + j * s.inner]);
          double total = 0.0;
          for (std::size_t j = 0; j < s.len; ++j) total += std::exp(x[base + j * s.inner] - mx);
          if (n.op == Op::kSoftmax) {
            for (std::size_t j = 0; j < s.len; ++j) y[base + j * s.inner] = std::exp(x[base + j * s.inner] - mx) / total;
          } else {
            const double lse = mx + std::log(total);
            for (std::size_t j = 0; j < s.len; ++j) y[base + j * s.inner] = x[base + j * s.inner] - lse;
          }
        }
      }
      break;
    }
    case Op::kSum:
    case Op::kMean: {
      double acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += x[i];
      y[0] = n.op == Op::kSum ? acc : acc / static_cast<double>(a.size());
      break;
    }
    case Op::kSumAxis: {
      const AxisSplit s = split_axis(a.shape(), n.attrs.axis);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < s.len; ++j) acc += x[(o * s.len + j) * s.inner + i];
          y[o * s.inner + i] = acc;
        }
      }
      break;
    }
    case Op::kReshape:
      std::copy(x, x + size, y);
      break;
    case Op::kGatherRows: {
      const std::size_t d = a.dim(1);
      for (std::size_t m = 0; m < n.attrs.indices.size(); ++m) {
        std::copy(x + n.attrs.indices[m] * d, x + (n.attrs.indices[m] + 1) * d, y + m * d);
      }
      break;
    }
    case Op::kL2NormalizeRows: {
      const std::size_t rows = a.dim(0), d = a.dim(1);
      for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sq += x[r * d + j] * x[r * d + j];
        if (!(sq > 0.0)) node_error(ErrorCode::kInvalidArgument, id, n, "row " + std::to_string(r) + " has zero norm");
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t j = 0; j < d; ++j) y[r * d + j] = x[r * d + j] * inv;
      }
      break;
    }
    case Op::kRowDot: {
      const double* b = v[n.inputs[1]].data().data();
      const std::size_t d = a.dim(1);
      for (std::size_t r = 0; r < a.dim(0); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += x[r * d + j] * b[r * d + j];
        y[r] = acc;
      }
      break;
    }
    case Op::kPick: {
      const std::size_t k = a.dim(1);
      for (std::size_t r = 0; r < a.dim(0); ++r) y[r] = x[r * k + n.attrs.indices[r]];
      break;
    }
    default:
      node_error(ErrorCode::kState, id, n, "unsupported op");
  }
  return out;
}

}  // namespace

std::vector<Tensor> forward(const Graph& graph, const Bindings& bindings, const EvalOptions& options,
                            EvalStats* stats) {
  std::vector<Tensor> values;
  values.reserve(graph.size());
  for (NodeId id = 0; id < graph.size(); ++id) {
    const Node& n = graph.node(id);
    values.push_back(eval_node(id, n, values, bindings));
    if (stats) ++stats->op_counts[static_cast<std::size_t>(n.op)];
    if (options.check_finite && !values.back().all_finite()) {
      node_error(ErrorCode::kNonFinite, id, n, "produced a non-finite value");
    }
  }
  return values;
}

std::map<std::string, Tensor> evaluate(const Graph& graph, const Bindings& bindings, const EvalOptions& options) {
  std::vector<Tensor> values = forward(graph, bindings, options);
  std::map<std::string, Tensor> out;
  for (NodeId id = 0; id < graph.size(); ++id) {
    const Node& n = graph.node(id);
    if (!n.name.empty() && n.op != Op::kParameter && n.op != Op::kInput) out[n.name] = std::move(values[id]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

void accumulate(std::vector<Tensor>& grads, NodeId id, const Shape& shape) {
  if (grads[id].empty()) grads[id] = Tensor(shape);
}

void backprop_node(const Node& n, NodeId id, const std::vector<Tensor>& v, std::vector<Tensor>& g,
                   const std::vector<bool>& needs) {
  const Tensor& gy = g[id];
  const double* dy = gy.data().data();
  const double* y = v[id].data().data();
  const std::size_t size = gy.size();
  const NodeId ia = n.inputs[0];
  const double* x = v[ia].data().data();

  auto grad_of = [&](NodeId in) -> double* {
    accumulate(g, in, v[in].shape());
    return g[in].data().data();
  };

  switch (n.op) {
    case Op::kRelu: {
      double* dx = grad_of(ia);
      for (std::size_t i = 0; i < size; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
      break;
    }
    case Op::kLog: {
      double* dx = grad_of(ia);
      for (std::size_t i = 0; i < size; ++i) dx[i] += dy[i] / x[i];
      break;
    }
    case Op::kExp: {
      double* dx = grad_of(ia);
      for (std::size_t i = 0; i < size; ++i) dx[i] += dy[i] * y[i];
      break;
    }
    case Op::kPow: {
      double* dx = grad_of(ia);
      const double p = n.attrs.scalar;
      for (std::size_t i = 0; i < size; ++i) dx[i] += dy[i] * p * std::pow(x[i], p - 1.0);
      break;
    }
    case Op::kScale: {
      double* dx = grad_of(ia);
      for (std::size_t i = 0; i < size; ++i) dx[i] += dy[i] * n.attrs.scalar;
      break;
    }
    case Op::kAddScalar:
    case Op::kReshape: {
      double* dx = grad_of(ia);
      for (std::size_t i = 0; i < size; ++i) dx[i] += dy[i];
      break;
    }
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      const NodeId ib = n.inputs[1];
      const double* b = v[ib].data().data();
      if (needs[ia]) {
        double* da = grad_of(ia);
        if (n.op == Op::kAdd || n.op == Op::kSub) {
          for (std::size_t i = 0; i < size; ++i) da[i] += dy[i];
        } else if (n.op == Op::kMul) {
          for (std::size_t i = 0; i < size; ++i) da[i] += dy[i] * b[i];
        } else {
          for (std::size_t i = 0; i < size; ++i) da[i] += dy[i] / b[i];
        }
      }
      if (needs[ib]) {
        double* db = grad_of(ib);
        if (n.op == Op::kAdd) {
          for (std::size_t i = 0; i < size; ++i) db[i] += dy[i];
        } else if (n.op == Op::kSub) {
          for (std::size_t i = 0; i < size; ++i) db[i] -= dy[i];
        } else if (n.op == Op::kMul) {
          for (std::size_t i = 0; i < size; ++i) db[i] += dy[i] * x[i];
        } else {
          for (std::size_t i = 0; i < size; ++i) db[i] -= dy[i] * x[i] / (b[i] * b[i]);
        }
      }
      break;
    }
    case Op::kBiasAdd: {
      const NodeId ib = n.inputs[1];
      if (needs[ia]) {
        double* dx = grad_of(ia);
        for (std::size_t i = 0; i < size; ++i) dx[i] += dy[i];
      }
      if (needs[ib]) {
        double* db = grad_of(ib);
        if (n.shape.size() == 3) {
          const std::size_t plane = n.shape[1] * n.shape[2];
          for (std::size_t c = 0; c < n.shape[0]; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += dy[c * plane + i];
            db[c] += acc;
          }
        } else {
          const std::size_t cols = n.shape[1];
          for (std::size_t r = 0; r < n.shape[0]; ++r) {
            for (std::size_t c = 0; c < cols; ++c) db[c] += dy[r * cols + c];
          }
        }
      }
      break;
    }
    case Op::kConv2d: {
      const NodeId iw = n.inputs[1];
      const Tensor& a = v[ia];
      const Tensor& w = v[iw];
      const std::size_t ci = a.dim(0), h = a.dim(1), wd = a.dim(2);
      const std::size_t co = w.dim(0), k = w.dim(2);
      const std::size_t ho = n.shape[1], wo = n.shape[2];
      const std::size_t kk = ci * k * k, p = ho * wo;
      ConstMapMat dout(dy, co, p);
      if (needs[iw]) {
        std::vector<double> cols(kk * p);
        im2col(x, ci, h, wd, k, n.attrs.stride, n.attrs.pad, ho, wo, cols.data());
        MapMat(grad_of(iw), co, kk).noalias() += dout * ConstMapMat(cols.data(), kk, p).transpose();
      }
      if (needs[ia]) {
        std::vector<double> dcols(kk * p);
        MapMat(dcols.data(), kk, p).noalias() = ConstMapMat(w.data().data(), co, kk).transpose() * dout;
        col2im(dcols.data(), ci, h, wd, k, n.attrs.stride, n.attrs.pad, ho, wo, grad_of(ia));
      }
      break;
    }
    case Op::kMatmul: {
      const NodeId ib = n.inputs[1];
      const Tensor& a = v[ia];
      const Tensor& b = v[ib];
      ConstMapMat dout(dy, n.shape[0], n.shape[1]);
      if (needs[ia]) {
        MapMat(grad_of(ia), a.dim(0), a.dim(1)).noalias() +=
            dout * ConstMapMat(b.data().data(), b.dim(0), b.dim(1)).transpose();
      }
      if (needs[ib]) {
        MapMat(grad_of(ib), b.dim(0), b.dim(1)).noalias() +=
            ConstMapMat(x, a.dim(0), a.dim(1)).transpose() * dout;
      }
      break;
    }
    case Op::kPatchAvgPool: {
      const Tensor& a = v[ia];
      const std::size_t c_n = a.dim(0), h = a.dim(1), w = a.dim(2);
      const std::size_t ph = h / n.attrs.rows, pw = w / n.attrs.cols;
      const double inv = 1.0 / static_cast<double>(ph * pw);
      double* dx = grad_of(ia);
      for (std::size_t r = 0; r < n.attrs.rows; ++r) {
        for (std::size_t q = 0; q < n.attrs.cols; ++q) {
          const std::size_t patch = r * n.attrs.cols + q;
          for (std::size_t c = 0; c < c_n; ++c) {
            const double gval = dy[patch * c_n + c] * inv;
            for (std::size_t yy = r * ph; yy < (r + 1) * ph; ++yy) {
              double* row = dx + (c * h + yy) * w;
              for (std::size_t xx = q * pw; xx < (q + 1) * pw; ++xx) row[xx] += gval;
            }
          }
        }
      }
      break;
    }
    case Op::kUpsample: {
      const Tensor& a = v[ia];
      const std::size_t c_n = a.dim(0), ih = a.dim(1), iw = a.dim(2);
      const std::size_t oh = n.shape[1], ow = n.shape[2];
      const Taps ty = make_taps(ih, oh), tx = make_taps(iw, ow);
      double* dx = grad_of(ia);
      for (std::size_t c = 0; c < c_n; ++c) {
        double* dst = dx + c * ih * iw;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const double fy = ty.frac[oy];
          double* r0 = dst + ty.lo[oy] * iw;
          double* r1 = dst + ty.hi[oy] * iw;
          const double* src = dy + (c * oh + oy) * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double fx = tx.frac[ox];
            const double gv = src[ox];
            r0[tx.lo[ox]] += gv * (1.0 - fy) * (1.0 - fx);
            r0[tx.hi[ox]] += gv * (1.0 - fy) * fx;
            r1[tx.lo[ox]] += gv * fy * (1.0 - fx);
            r1[tx.hi[ox]] += gv * fy * fx;
          }
        }
      }
      break;
    }
    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      const AxisSplit s = split_axis(n.shape, n.attrs.axis);
      double* dx = grad_of(ia);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.len * s.inner + i;
          if (n.op == Op::kSoftmax) {
            double dot = 0.0;
            for (std::size_t j = 0; j < s.len; ++j) dot += dy[base + j * s.inner] * y[base + j * s.inner];
            for (std::size_t j = 0; j < s.len; ++j) {
              const std::size_t at = base + j * s.inner;
              dx[at] += y[at] * (dy[at] - dot);
            }
          } else {
            double total = 0.0;
            for (std::size_t j = 0; j < s.len; ++j) total += dy[base + j * s.inner];
            for (std::size_t j = 0; j < s.len; ++j) {
              const std::size_t at = base + j * s.inner;
              dx[at] += dy[at] - std::exp(y[at]) * total;
            }
          }
        }
      }
      break;
    }
    case Op::kSum:
    case Op::kMean: {
      double* dx = grad_of(ia);
      const std::size_t in_size = v[ia].size();
      const double gv = n.op == Op::kSum ? dy[0] : dy[0] / static_cast<double>(in_size);
      for (std::size_t i = 0; i < in_size; ++i) dx[i] += gv;
      break;
    }
    case Op::kSumAxis: {
      const AxisSplit s = split_axis(v[ia].shape(), n.attrs.axis);
      double* dx = grad_of(ia);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.len; ++j) {
          for (std::size_t i = 0; i < s.inner; ++i) dx[(o * s.len + j) * s.inner + i] += dy[o * s.inner + i];
        }
      }
      break;
    }
    case Op::kGatherRows: {
      const std::size_t d = v[ia].dim(1);
      double* dx = grad_of(ia);
      for (std::size_t m = 0; m < n.attrs.indices.size(); ++m) {
        double* dst = dx + n.attrs.indices[m] * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += dy[m * d + j];
      }
      break;
    }
    case Op::kL2NormalizeRows: {
      const std::size_t rows = n.shape[0], d = n.shape[1];
      double* dx = grad_of(ia);
      for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0, dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          sq += x[r * d + j] * x[r * d + j];
          dot += y[r * d + j] * dy[r * d + j];
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t j = 0; j < d; ++j) dx[r * d + j] += (dy[r * d + j] - y[r * d + j] * dot) * inv;
      }
      break;
    }
    case Op::kRowDot: {
      const NodeId ib = n.inputs[1];
      const double* b = v[ib].data().data();
      const std::size_t d = v[ia].dim(1);
      if (needs[ia]) {
        double* da = grad_of(ia);
        for (std::size_t r = 0; r < n.shape[0]; ++r) {
          for (std::size_t j = 0; j < d; ++j) da[r * d + j] += dy[r] * b[r * d + j];
        }
      }
      if (needs[ib]) {
        double* db = grad_of(ib);
        for (std::size_t r = 0; r < n.shape[0]; ++r) {
          for (std::size_t j = 0; j < d; ++j) db[r * d + j] += dy[r] * x[r * d + j];
        }
      }
      break;
    }
    case Op::kPick: {
      const std::size_t k = v[ia].dim(1);
      double* dx = grad_of(ia);
      for (std::size_t r = 0; r < n.shape[0]; ++r) dx[r * k + n.attrs.indices[r]] += dy[r];
      break;
    }
    default:
      break;
  }
}

}  // namespace

ForwardBackward forward_backward(const Graph& graph, const Bindings& bindings, const EvalOptions& options) {
  if (!graph.output()) fail(ErrorCode::kState, "backward: graph has no designated output");
  const NodeId out = *graph.output();
  if (graph.node(out).shape != Shape{1}) {
    fail(ErrorCode::kShapeMismatch, "backward: output node #" + std::to_string(out) + " is not scalar (shape " +
                                        shape_string(graph.node(out).shape) + ")");
  }

  ForwardBackward result;
  result.values = forward(graph, bindings, options);
  result.output = result.values[out][0];

  // Only nodes downstream of a parameter carry gradient.
  std::vector<bool> needs(graph.size(), false);
  for (NodeId id = 0; id < graph.size(); ++id) {
    const Node& n = graph.node(id);
    if (n.op == Op::kParameter) {
      needs[id] = true;
      continue;
    }
    for (NodeId in : n.inputs) needs[id] = needs[id] || needs[in];
  }

  std::vector<Tensor> grads(graph.size());
  grads[out] = Tensor({1}, 1.0);
  for (NodeId id = out + 1; id-- > 0;) {
    const Node& n = graph.node(id);
    if (grads[id].empty() || n.inputs.empty() || !needs[id]) continue;
    backprop_node(n, id, result.values, grads, needs);
    if (options.check_finite) {
      for (NodeId in : n.inputs) {
        if (!grads[in].empty() && !grads[in].all_finite()) {
          node_error(ErrorCode::kNonFinite, id, n, "backward produced a non-finite gradient");
        }
      }
    }
  }

  for (NodeId id : graph.parameters()) {
    const Node& n = graph.node(id);
    result.gradients[n.name] = grads[id].empty() ? Tensor(n.shape) : std::move(grads[id]);
  }
  return result;
}

std::map<std::string, Tensor> backward(const Graph& graph, const Bindings& bindings, const EvalOptions& options) {
  return forward_backward(graph, bindings, options).gradients;
}

double grad_check(const Graph& graph, const Bindings& bindings, double eps, const GradCheckOptions& options) {
  if (!(eps > 0.0 && eps <= 1e-2)) fail(ErrorCode::kInvalidArgument, "grad_check: eps must lie in (0, 1e-2]");
  const ForwardBackward fb = forward_backward(graph, bindings);
  const NodeId out = *graph.output();

  Bindings probe = bindings;
  Rng rng(options.seed);
  double worst = 0.0;
  for (NodeId id : graph.parameters()) {
    const std::string& name = graph.node(id).name;
    Tensor& leaf = probe.at(name);
    const Tensor& analytic = fb.gradients.at(name);

    std::vector<std::size_t> coords(leaf.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > options.max_coords_per_leaf) coords = rng.sample(coords, options.max_coords_per_leaf);

    for (std::size_t i : coords) {
      const double saved = leaf[i];
      leaf[i] = saved + eps;
      const double up = forward(graph, probe)[out][0];
      leaf[i] = saved - eps;
      const double down = forward(graph, probe)[out][0];
      leaf[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace segda::ad
