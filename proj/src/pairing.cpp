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

#include "segda/pairing.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "segda/error.hpp"
#include "segda/rng.hpp"

namespace segda {

const char* label_source_name(LabelSource s) { return s == LabelSource::kGroundTruth ? "GT" : "PSEUDO"; }

std::vector<MinedPair> mine_pairs(const DisparityMatrix& d, double alpha, double beta, std::size_t k,
                                  std::uint64_t seed) {
  if (!(alpha >= 0.0 && alpha < beta)) fail(ErrorCode::kInvalidArgument, "mine_pairs: need 0 <= alpha < beta");
  if (k == 0) fail(ErrorCode::kInvalidArgument, "mine_pairs: k must be >= 1");
  Rng rng(seed);
  std::vector<MinedPair> out;
  for (std::size_t q = 0; q < d.rows; ++q) {
    std::size_t best = d.cols;
    double best_d = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> negatives;
    for (std::size_t j = 0; j < d.cols; ++j) {
      const double v = d.at(q, j);
      if (v < alpha && v < best_d) {
        best = j;
        best_d = v;
      }
      if (v > beta) negatives.push_back(j);
    }
    if (best == d.cols || negatives.size() < k) continue;
    MinedPair pair;
    pair.query = q;
    pair.positive = best;
    pair.positive_disparity = best_d;
    pair.negatives = rng.sample(std::move(negatives), k);
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<PairSet> to_pair_sets(const std::vector<MinedPair>& mined, std::size_t query_image, Domain query_domain,
                                  std::size_t key_image, Domain key_domain, LabelSource source) {
  std::vector<PairSet> out;
  out.reserve(mined.size());
  for (const MinedPair& m : mined) {
    PairSet p;
    p.query = {query_image, m.query, query_domain};
    p.positive = {key_image, m.positive, key_domain};
    for (std::size_t n : m.negatives) p.negatives.push_back({key_image, n, key_domain});
    p.disparity = m.positive_disparity;
    p.source = source;
    out.push_back(std::move(p));
  }
  return out;
}

void write_pair_sets(std::ostream& os, const std::vector<PairSet>& pairs) {
  for (const PairSet& p : pairs) {
    os << p.query.image << ',' << p.query.patch << ',' << p.positive.image << ',' << p.positive.patch;
    for (const PatchRef& n : p.negatives) os << ',' << n.patch;
    std::ostringstream d;
    d.precision(17);
    d << p.disparity;
    os << ',' << d.str() << ',' << label_source_name(p.source) << '\n';
  }
}

std::vector<PairSet> read_pair_sets(std::istream& is) {
  std::vector<PairSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 7) fail(ErrorCode::kFormat, "pair line " + std::to_string(line_no) + ": too few fields");
    try {
      PairSet p;
      p.query = {std::stoul(fields[0]), std::stoul(fields[1]), Domain::kTarget};
      p.positive = {std::stoul(fields[2]), std::stoul(fields[3]), Domain::kSource};
      for (std::size_t i = 4; i + 2 < fields.size(); ++i) {
        p.negatives.push_back({p.positive.image, std::stoul(fields[i]), Domain::kSource});
      }
      p.disparity = std::stod(fields[fields.size() - 2]);
      const std::string& tag = fields.back();
      if (tag == "GT") p.source = LabelSource::kGroundTruth;
      else if (tag == "PSEUDO") p.source = LabelSource::kPseudo;
      else fail(ErrorCode::kFormat, "pair line " + std::to_string(line_no) + ": unknown label source '" + tag + "'");
      out.push_back(std::move(p));
    } catch (const std::logic_error&) {
      fail(ErrorCode::kFormat, "pair line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return out;
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::kShapeMismatch, "contrastive_loss: vector lengths differ");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) fail(ErrorCode::kInvalidArgument, "contrastive_loss: zero-norm vector");
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<double> logits(std::span<const double> q, std::span<const double> pos,
                           const std::vector<std::span<const double>>& negs, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kInvalidArgument, "contrastive_loss: tau must be > 0");
  std::vector<double> out{cosine(q, pos) / tau};
  for (const auto& n : negs) out.push_back(cosine(q, n) / tau);
  return out;
}

}  // namespace

double contrastive_loss(std::span<const double> query, std::span<const double> positive,
                        const std::vector<std::span<const double>>& negatives, double tau) {
  const std::vector<double> l = logits(query, positive, negatives, tau);
  double mx = l[0];
  for (double v : l) mx = std::max(mx, v);
  double total = 0.0;
  for (double v : l) total += std::exp(v - mx);
  return -(l[0] - mx - std::log(total));
}

double contrastive_loss_ratio_form(std::span<const double> query, std::span<const double> positive,
                                   const std::vector<std::span<const double>>& negatives, double tau) {
  const std::vector<double> l = logits(query, positive, negatives, tau);
  const double pos = std::exp(l[0]);
  double denom = pos;
  for (std::size_t i = 1; i < l.size(); ++i) denom += std::exp(l[i]);
  return -std::log(pos / denom);
}

ad::NodeId contrastive_loss_node(ad::Graph& g, ad::NodeId queries, ad::NodeId keys,
                                 const std::vector<MinedPair>& pairs, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kInvalidArgument, "contrastive_loss: tau must be > 0");
  if (pairs.empty()) fail(ErrorCode::kInvalidArgument, "contrastive_loss_node: no pairs");
  const std::size_t k = pairs.front().negatives.size();
  std::vector<std::size_t> q_rows, key_rows;
  for (const MinedPair& p : pairs) {
    if (p.negatives.size() != k) fail(ErrorCode::kInvalidArgument, "contrastive_loss_node: ragged negative lists");
    for (std::size_t j = 0; j <= k; ++j) q_rows.push_back(p.query);
    key_rows.push_back(p.positive);
    key_rows.insert(key_rows.end(), p.negatives.begin(), p.negatives.end());
  }
  const ad::NodeId qn = g.gather_rows(g.l2_normalize_rows(queries), std::move(q_rows));
  const ad::NodeId kn = g.gather_rows(g.l2_normalize_rows(keys), std::move(key_rows));
  const ad::NodeId cos = g.reshape(g.row_dot(qn, kn), {pairs.size(), k + 1});
  const ad::NodeId logp = g.log_softmax(g.scale(cos, 1.0 / tau), 1);
  const ad::NodeId pos = g.pick(logp, std::vector<std::size_t>(pairs.size(), 0));
  return g.scale(g.sum(pos), -1.0);
}

}  // namespace segda
