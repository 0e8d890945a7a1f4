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

// Plain-text run configuration.
//
//   # comment
//   key = value
//
// Every key has a default; unknown keys and malformed values are rejected
// with the file and line. The resolved form (every key, sorted) reproduces a
// run on its own.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segda/data.hpp"
#include "segda/train.hpp"

namespace segda {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// All known keys, sorted by name.
const std::vector<ConfigKey>& config_keys();

class RunConfig {
 public:
  RunConfig();

  static RunConfig load(const std::string& path);
  /// Parses `key = value` lines; `origin` prefixes error messages.
  static RunConfig parse(const std::string& text, const std::string& origin);

  void set(const std::string& key, const std::string& value);
  /// "key=value" form used for command-line overrides.
  void apply_override(const std::string& assignment);
  const std::string& get(const std::string& key) const;

  std::string to_text() const;
  void write(const std::string& path) const;

  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  std::uint64_t seed() const;
  NetConfig net() const;
  BenchmarkSpec benchmark() const;
  /// Phase 1 and phase 2 settings; both validated.
  TrainConfig phase1() const;
  TrainConfig phase2() const;
  TwoPhaseOptions two_phase(const std::string& out_dir) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace segda
