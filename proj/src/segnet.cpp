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

#include "segda/segnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "segda/error.hpp"
#include "segda/rng.hpp"

namespace segda {
namespace {

constexpr char kCheckpointMagic[8] = {'S', 'E', 'G', 'D', 'A', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string conv_name(std::size_t stage, std::size_t j, const char* what) {
  return "enc.s" + std::to_string(stage) + ".c" + std::to_string(j) + "." + what;
}

std::string proj_name(std::size_t stage, const char* what) {
  return "proj.s" + std::to_string(stage) + "." + what;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoul(item));
  }
  return out;
}

}  // namespace

void NetConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfig, "network config: " + what); };
  if (channels.empty()) bad("at least one encoder stage is required");
  for (std::size_t c : channels) {
    if (c == 0) bad("channel widths must be positive");
  }
  if (num_classes < 2) bad("num_classes must be >= 2");
  if (convs_per_stage == 0) bad("convs_per_stage must be >= 1");
  if (hidden == 0 || latent_dim == 0) bad("latent widths must be positive");
  const std::size_t total_stride = stage_stride(stages());
  if (image_h == 0 || image_w == 0 || image_h % total_stride || image_w % total_stride) {
    bad("image size " + std::to_string(image_h) + "x" + std::to_string(image_w) + " must be divisible by " +
        std::to_string(total_stride));
  }
  for (std::size_t s : latent_stages) {
    if (s == 0 || s > stages()) bad("latent stage " + std::to_string(s) + " out of range");
  }
}

std::string NetConfig::canonical() const {
  std::ostringstream os;
  os << "image_h=" << image_h << "\nimage_w=" << image_w << "\nnum_classes=" << num_classes
     << "\nchannels=" << join(channels) << "\nconvs_per_stage=" << convs_per_stage
     << "\nlatent_stages=" << join(latent_stages) << "\nhidden=" << hidden << "\nlatent_dim=" << latent_dim << "\n";
  return os.str();
}

std::uint64_t NetConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

PatchGrid::PatchGrid(std::size_t image_h, std::size_t image_w, std::size_t patch_h, std::size_t patch_w)
    : patch_h_(patch_h), patch_w_(patch_w), rows_(0), cols_(0) {
  if (patch_h == 0 || patch_w == 0 || patch_h % 4 || patch_w % 4) {
    fail(ErrorCode::kConfig, "patch size " + std::to_string(patch_w) + "x" + std::to_string(patch_h) +
                                 " must be positive and divisible by 4");
  }
  if (image_h % patch_h || image_w % patch_w) {
    fail(ErrorCode::kConfig, "image " + std::to_string(image_w) + "x" + std::to_string(image_h) +
                                 " is not divisible into " + std::to_string(patch_w) + "x" +
                                 std::to_string(patch_h) + " patches");
  }
  rows_ = image_h / patch_h;
  cols_ = image_w / patch_w;
}

Rect PatchGrid::image_rect(std::size_t patch) const {
  if (patch >= count()) fail(ErrorCode::kInvalidArgument, "patch index " + std::to_string(patch) + " out of range");
  return {(patch / cols_) * patch_h_, (patch % cols_) * patch_w_, patch_h_, patch_w_};
}

Rect PatchGrid::feature_rect(std::size_t patch, std::size_t stride) const {
  const Rect r = image_rect(patch);
  return {r.y0 / stride, r.x0 / stride, r.h / stride, r.w / stride};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

ModelParams init_params(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  params.config = config;
  Rng rng(seed);

  auto fan_in_uniform = [&](Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
  };

  const std::size_t k = 3;
  std::size_t in_c = 3;
  for (std::size_t s = 1; s <= config.stages(); ++s) {
    const std::size_t out_c = config.channels[s - 1];
    for (std::size_t j = 0; j < config.convs_per_stage; ++j) {
      const std::size_t ci = j == 0 ? in_c : out_c;
      params.tensors[conv_name(s, j, "w")] = fan_in_uniform({out_c, ci, k, k}, ci * k * k);
      params.tensors[conv_name(s, j, "b")] = Tensor({out_c});
    }
    in_c = out_c;
  }
  params.tensors["head.w"] = fan_in_uniform({config.num_classes, in_c, 1, 1}, in_c);
  params.tensors["head.b"] = Tensor({config.num_classes});

  for (std::size_t s : config.latent_stages) {
    const std::size_t c = config.channels[s - 1];
    params.tensors[proj_name(s, "w1")] = fan_in_uniform({c, config.hidden}, c);
    params.tensors[proj_name(s, "b1")] = Tensor({config.hidden});
    params.tensors[proj_name(s, "w2")] = fan_in_uniform({config.hidden, config.latent_dim}, config.hidden);
    params.tensors[proj_name(s, "b2")] = Tensor({config.latent_dim});
  }
  return params;
}

void check_grid(const NetConfig& config, const PatchGrid& grid) {
  if (grid.image_h() != config.image_h || grid.image_w() != config.image_w) {
    fail(ErrorCode::kConfig, "patch grid covers " + std::to_string(grid.image_w()) + "x" +
                                 std::to_string(grid.image_h()) + " but the network expects " +
                                 std::to_string(config.image_w) + "x" + std::to_string(config.image_h));
  }
  for (std::size_t s : config.latent_stages) {
    const std::size_t stride = config.stage_stride(s);
    if (grid.patch_h() % stride || grid.patch_w() % stride) {
      fail(ErrorCode::kConfig, "patch " + std::to_string(grid.patch_w()) + "x" + std::to_string(grid.patch_h()) +
                                   " maps to less than one whole feature cell at stage " + std::to_string(s) +
                                   " (stride " + std::to_string(stride) + ")");
    }
  }
}

NetNodes build_network(ad::Graph& g, const NetConfig& config, ad::NodeId image, const PatchGrid* grid) {
  const Shape& in_shape = g.node(image).shape;
  if (in_shape != Shape{3, config.image_h, config.image_w}) {
    fail(ErrorCode::kShapeMismatch, "network input " + shape_string(in_shape) + " does not match configured [3," +
                                        std::to_string(config.image_h) + "," + std::to_string(config.image_w) + "]");
  }
  if (grid) check_grid(config, *grid);

  NetNodes nodes;
  ad::NodeId x = image;
  std::size_t in_c = 3;
  for (std::size_t s = 1; s <= config.stages(); ++s) {
    const std::size_t out_c = config.channels[s - 1];
    for (std::size_t j = 0; j < config.convs_per_stage; ++j) {
      const std::size_t ci = j == 0 ? in_c : out_c;
      const ad::NodeId w = g.parameter(conv_name(s, j, "w"), {out_c, ci, 3, 3});
      const ad::NodeId b = g.parameter(conv_name(s, j, "b"), {out_c});
      x = g.relu(g.bias_add(g.conv2d(x, w, j == 0 ? 2 : 1, 1), b));
    }
    nodes.stage_features.push_back(x);
    in_c = out_c;
  }

  const ad::NodeId hw = g.parameter("head.w", {config.num_classes, in_c, 1, 1});
  const ad::NodeId hb = g.parameter("head.b", {config.num_classes});
  const ad::NodeId coarse = g.bias_add(g.conv2d(x, hw, 1, 0), hb);
  nodes.logits = g.upsample(coarse, config.image_h, config.image_w);
  nodes.probs = g.softmax(nodes.logits, 0);

  if (grid) {
    for (std::size_t s : config.latent_stages) {
      const std::size_t c = config.channels[s - 1];
      const ad::NodeId pooled = g.patch_avg_pool(nodes.stage_features[s - 1], grid->rows(), grid->cols());
      const ad::NodeId w1 = g.parameter(proj_name(s, "w1"), {c, config.hidden});
      const ad::NodeId b1 = g.parameter(proj_name(s, "b1"), {config.hidden});
      const ad::NodeId w2 = g.parameter(proj_name(s, "w2"), {config.hidden, config.latent_dim});
      const ad::NodeId b2 = g.parameter(proj_name(s, "b2"), {config.latent_dim});
      const ad::NodeId hidden = g.relu(g.bias_add(g.matmul(pooled, w1), b1));
      nodes.latents.push_back(g.bias_add(g.matmul(hidden, w2), b2));
    }
  }
  return nodes;
}

ad::Bindings bind_params(const ModelParams& params) {
  ad::Bindings b;
  for (const auto& [name, t] : params.tensors) b.emplace(name, t);
  return b;
}

namespace {

// Inference graphs only bind the leaves they declare.
ad::Bindings bind_for(const ad::Graph& g, const ModelParams& params, const Tensor& image) {
  ad::Bindings b;
  for (ad::NodeId id : g.parameters()) {
    const std::string& name = g.node(id).name;
    auto it = params.tensors.find(name);
    if (it == params.tensors.end()) fail(ErrorCode::kState, "model parameters lack tensor '" + name + "'");
    b.emplace(name, it->second);
  }
  b.emplace("image", image);
  return b;
}

}  // namespace

Tensor segment(const ModelParams& params, const Tensor& image) {
  ad::Graph g;
  const ad::NodeId in = g.input("image", image.shape());
  const NetNodes nodes = build_network(g, params.config, in, nullptr);
  return std::move(ad::forward(g, bind_for(g, params, image))[nodes.probs]);
}

NetOutputs forward(const ModelParams& params, const Tensor& image, const PatchGrid& grid, ad::EvalStats* stats) {
  ad::Graph g;
  const ad::NodeId in = g.input("image", image.shape());
  const NetNodes nodes = build_network(g, params.config, in, &grid);
  std::vector<Tensor> values = ad::forward(g, bind_for(g, params, image), {}, stats);
  NetOutputs out;
  out.probs = std::move(values[nodes.probs]);
  for (ad::NodeId id : nodes.latents) out.latents.push_back(std::move(values[id]));
  return out;
}

std::vector<Tensor> project_latent(const ModelParams& params, const Tensor& image, const PatchGrid& grid) {
  return forward(params, image, grid).latents;
}

// ---------------------------------------------------------------------------
// Checkpoints (little-endian):
//   "SEGDACKP" | u32 version | u64 config hash | u32 len + network config text
//   | u32 tensor count | per tensor: u32 len + name, u32 rank, u64 dims[rank],
//   f64 values[prod(dims)]

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorCode::kFormat, path + ": truncated checkpoint");
  return v;
}

std::string get_string(std::istream& is, const std::string& path) {
  const auto len = get<std::uint32_t>(is, path);
  if (len > (1u << 20)) fail(ErrorCode::kFormat, path + ": implausible string length in checkpoint");
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) fail(ErrorCode::kFormat, path + ": truncated checkpoint");
  return s;
}

NetConfig parse_net_config(const std::string& text, const std::string& path) {
  NetConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "image_h") c.image_h = std::stoul(value);
    else if (key == "image_w") c.image_w = std::stoul(value);
    else if (key == "num_classes") c.num_classes = std::stoul(value);
    else if (key == "channels") c.channels = parse_list(value);
    else if (key == "convs_per_stage") c.convs_per_stage = std::stoul(value);
    else if (key == "latent_stages") c.latent_stages = parse_list(value);
    else if (key == "hidden") c.hidden = std::stoul(value);
    else if (key == "latent_dim") c.latent_dim = std::stoul(value);
    else fail(ErrorCode::kFormat, path + ": unknown network key '" + key + "'");
  }
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot write checkpoint " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, params.config.hash());
  const std::string text = params.config.canonical();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& [name, t] : params.tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) fail(ErrorCode::kIo, "failed writing checkpoint " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open checkpoint " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    fail(ErrorCode::kFormat, path + ": not a segda checkpoint");
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kFormat, path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto hash = get<std::uint64_t>(is, path);
  ModelParams params;
  params.config = parse_net_config(get_string(is, path), path);
  if (params.config.hash() != hash) fail(ErrorCode::kFormat, path + ": config hash mismatch");
  params.config.validate();

  const auto count = get<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(is, path);
    const auto rank = get<std::uint32_t>(is, path);
    if (rank == 0 || rank > 8) fail(ErrorCode::kFormat, path + ": bad rank for tensor '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is, path));
    std::vector<double> data(shape_size(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      fail(ErrorCode::kFormat, path + ": truncated tensor '" + name + "'");
    }
    params.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }

  const ModelParams reference = init_params(params.config, 0);
  for (const auto& [name, t] : reference.tensors) {
    auto it = params.tensors.find(name);
    if (it == params.tensors.end() || it->second.shape() != t.shape()) {
      fail(ErrorCode::kFormat, path + ": tensor '" + name + "' missing or misshapen");
    }
  }
  return params;
}

}  // namespace segda
