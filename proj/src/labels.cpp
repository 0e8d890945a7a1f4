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

#include "segda/labels.hpp"

#include "segda/error.hpp"

namespace segda {

const char* domain_name(Domain d) { return d == Domain::kSource ? "source" : "target"; }

LabelMap LabelMap::crop(const Rect& r) const {
  if (r.y0 + r.h > h || r.x0 + r.w > w) fail(ErrorCode::kInvalidArgument, "crop rectangle exceeds label map");
  LabelMap out(r.h, r.w);
  for (std::size_t y = 0; y < r.h; ++y) {
    for (std::size_t x = 0; x < r.w; ++x) out.at(y, x) = at(r.y0 + y, r.x0 + x);
  }
  return out;
}

std::size_t LabelMap::count_annotated() const {
  std::size_t n = 0;
  for (std::uint8_t v : data) n += v != kVoid;
  return n;
}

void LabelMap::validate(std::size_t num_classes, const std::string& source) const {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] != kVoid && data[i] >= num_classes) {
      fail(ErrorCode::kFormat, source + ": label " + std::to_string(data[i]) + " at pixel (x=" +
                                   std::to_string(i % w) + ", y=" + std::to_string(i / w) +
                                   ") is not below num_classes=" + std::to_string(num_classes));
    }
  }
}

}  // namespace segda
