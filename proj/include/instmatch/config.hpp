// Copyright 2026 The instmatch Authors.
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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "instmatch/adapter.hpp"
#include "instmatch/matcher.hpp"
#include "instmatch/synth.hpp"
#include "instmatch/trainer.hpp"

namespace instmatch {

/// Flat `key = value` text. '#' starts a comment; keys must be known.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  std::optional<std::string> get(std::string_view key) const;
  bool contains(std::string_view key) const { return values_.count(std::string(key)) != 0; }
  void set(std::string key, std::string value);

  double get_double(std::string_view key, double fallback) const;
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

SynthConfig synth_config_from(const KeyValueConfig& cfg);
/// Starts from TrainConfig::defaults_for(kind).
TrainConfig train_config_from(const KeyValueConfig& cfg, AdapterKind kind);
MatcherConfig matcher_config_from(const KeyValueConfig& cfg);

AdapterKind parse_adapter_kind(std::string_view text);
std::string_view adapter_kind_name(AdapterKind kind);

/// Inputs and settings for one reproducible match (+ optional eval) run.
/// Keys: templates, queries, params, gt, gt_masks, plus any config key.
/// Relative paths resolve against the manifest's directory.
struct RunManifest {
  std::filesystem::path templates;
  std::filesystem::path queries;
  std::optional<std::filesystem::path> params;
  std::optional<std::filesystem::path> ground_truth;
  std::optional<std::filesystem::path> ground_truth_masks;
  KeyValueConfig settings;

  /// Throws kConfig for missing keys or out-of-range values and kIo for
  /// missing files.
  static RunManifest load(const std::filesystem::path& path);
};

}  // namespace instmatch
