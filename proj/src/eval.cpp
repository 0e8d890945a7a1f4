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

#include "segda/eval.hpp"

#include <fstream>
#include <limits>

#include "segda/error.hpp"
#include "segda/losses.hpp"

namespace segda {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.h != gt.h || pred.w != gt.w) fail(ErrorCode::kShapeMismatch, "confusion: prediction and ground truth differ in size");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint8_t g = gt.data[i];
    if (g == kVoid) continue;
    const std::uint8_t p = pred.data[i];
    if (g >= n_ || p >= n_) fail(ErrorCode::kInvalidArgument, "confusion: label out of range");
    ++counts_[g * n_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) fail(ErrorCode::kShapeMismatch, "confusion: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

IoUReport miou(const ConfusionMatrix& cm) {
  const std::size_t n = cm.num_classes();
  IoUReport r;
  r.per_class.resize(n);
  r.counted.assign(n, false);
  if (cm.total() == 0) {
    r.miou = std::numeric_limits<double>::quiet_NaN();
    r.message = "mIoU undefined: no scored pixels";
    return r;
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = row + col - tp;
    if (denom > 0) r.per_class[c] = static_cast<double>(tp) / static_cast<double>(denom);
    if (row > 0) {
      r.counted[c] = true;
      sum += *r.per_class[c];
      ++present;
    }
  }
  r.defined = true;
  r.miou = sum / static_cast<double>(present);
  return r;
}

ConfusionMatrix confusion_on(const ModelParams& params, const std::vector<Tensor>& images,
                             const std::vector<LabelMap>& labels) {
  if (images.size() != labels.size()) fail(ErrorCode::kInvalidArgument, "confusion: images and labels differ in count");
  ConfusionMatrix cm(params.config.num_classes);
  for (std::size_t i = 0; i < images.size(); ++i) cm.accumulate(pseudo_labels(segment(params, images[i])), labels[i]);
  return cm;
}

ConfusionMatrix confusion_on(const ModelParams& params, const std::vector<Scene>& scenes) {
  ConfusionMatrix cm(params.config.num_classes);
  for (const Scene& s : scenes) cm.accumulate(pseudo_labels(segment(params, s.image)), s.labels);
  return cm;
}

void write_iou_csv(const std::string& path, const IoUReport& report) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os.precision(10);
  os << "class,iou\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    os << c << ',';
    if (report.per_class[c] && report.counted[c]) os << *report.per_class[c];
    os << '\n';
  }
  os << "miou,";
  if (report.defined) os << report.miou;
  else os << "undefined";
  os << '\n';
}

}  // namespace segda
