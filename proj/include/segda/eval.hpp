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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segda/data.hpp"
#include "segda/labels.hpp"
#include "segda/segnet.hpp"

namespace segda {

/// Rows are ground truth, columns prediction. VOID ground truth is skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

  std::size_t num_classes() const { return n_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * n_ + pred]; }
  std::uint64_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

struct IoUReport {
  std::vector<std::optional<double>> per_class;  // nullopt: zero denominator
  std::vector<bool> counted;                     // class has ground-truth pixels
  bool defined = false;
  double miou = 0.0;
  std::string message;
};

IoUReport miou(const ConfusionMatrix& cm);

/// Confusion matrix of argmax predictions over labeled scenes.
ConfusionMatrix confusion_on(const ModelParams& params, const std::vector<Scene>& scenes);
ConfusionMatrix confusion_on(const ModelParams& params, const std::vector<Tensor>& images,
                             const std::vector<LabelMap>& labels);

/// CSV: class,iou rows followed by a miou row.
void write_iou_csv(const std::string& path, const IoUReport& report);

}  // namespace segda
