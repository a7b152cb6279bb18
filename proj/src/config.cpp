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

#include "instmatch/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "instmatch/error.hpp"

namespace instmatch {
namespace {

constexpr std::array<std::string_view, 35> kKnownKeys = {
    // gen-synth
    "num_instances", "templates_per_instance", "dim", "sigma", "informative_channels",
    "distractors_per_image", "confusable_fraction", "confusable_cosine", "confusable_channels",
    "num_images", "objects_per_image", "grid_size", "image_size", "patch_jitter", "seed",
    // train-adapter
    "learning_rate", "batch_size", "epochs", "temperature", "dropout_rate", "beta", "alpha",
    // match
    "aggregation", "avg_k", "assignment", "delta", "use_appearance_bonus",
    // run manifest
    "templates", "queries", "params", "gt", "gt_masks", "adapter_kind", "eval_mode", "train",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::kConfig,
              "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": unknown key '" +
                                          std::string(key) + "'");
    }
    if (cfg.contains(key)) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": duplicate key '" +
                                          std::string(key) + "'");
    }
    cfg.values_.emplace(std::string(key), std::string(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void KeyValueConfig::set(std::string key, std::string value) {
  values_[std::move(key)] = std::move(value);
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) bad_value(key, *v);
  return out;
}

std::size_t KeyValueConfig::get_size(std::string_view key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::uint64_t KeyValueConfig::get_u64(std::string_view key, std::uint64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) bad_value(key, *v);
  return out;
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  bad_value(key, *v);
}

SynthConfig synth_config_from(const KeyValueConfig& cfg) {
  SynthConfig s;
  s.num_instances = cfg.get_size("num_instances", s.num_instances);
  s.templates_per_instance = cfg.get_size("templates_per_instance", s.templates_per_instance);
  s.dim = cfg.get_size("dim", s.dim);
  s.sigma = cfg.get_double("sigma", s.sigma);
  s.informative_channels = cfg.get_size("informative_channels", s.informative_channels);
  s.distractors_per_image = cfg.get_size("distractors_per_image", s.distractors_per_image);
  s.confusable_fraction = cfg.get_double("confusable_fraction", s.confusable_fraction);
  s.confusable_cosine = cfg.get_double("confusable_cosine", s.confusable_cosine);
  s.confusable_channels = cfg.get_size("confusable_channels", s.confusable_channels);
  s.num_images = cfg.get_size("num_images", s.num_images);
  s.objects_per_image = cfg.get_size("objects_per_image", s.objects_per_image);
  s.grid_size = cfg.get_size("grid_size", s.grid_size);
  s.image_size = cfg.get_size("image_size", s.image_size);
  s.patch_jitter = cfg.get_double("patch_jitter", s.patch_jitter);
  s.seed = cfg.get_u64("seed", s.seed);
  s.validate();
  return s;
}

TrainConfig train_config_from(const KeyValueConfig& cfg, AdapterKind kind) {
  TrainConfig t = TrainConfig::defaults_for(kind);
  t.learning_rate = cfg.get_double("learning_rate", t.learning_rate);
  t.batch_size = cfg.get_size("batch_size", t.batch_size);
  t.epochs = cfg.get_size("epochs", t.epochs);
  t.temperature = cfg.get_double("temperature", t.temperature);
  t.dropout_rate = cfg.get_double("dropout_rate", t.dropout_rate);
  t.seed = cfg.get_u64("seed", t.seed);
  t.beta = cfg.get_double("beta", t.beta);
  t.alpha = cfg.get_double("alpha", t.alpha);
  t.validate();
  return t;
}

MatcherConfig matcher_config_from(const KeyValueConfig& cfg) {
  MatcherConfig m;
  if (const auto agg = cfg.get("aggregation")) {
    if (*agg == "max") {
      m.aggregation = Aggregation::kMax;
    } else if (*agg == "avg_k") {
      m.aggregation = Aggregation::kAvgTopK;
    } else {
      bad_value("aggregation", *agg);
    }
  }
  m.avg_k = cfg.get_size("avg_k", m.avg_k);
  if (const auto assign = cfg.get("assignment")) {
    if (*assign == "stable") {
      m.assignment = Assignment::kStable;
    } else if (*assign == "argmax") {
      m.assignment = Assignment::kArgmax;
    } else {
      bad_value("assignment", *assign);
    }
  }
  m.delta = cfg.get_double("delta", m.delta);
  if (!(m.delta >= 0.0 && m.delta <= 1.0)) bad_value("delta", *cfg.get("delta"));
  m.use_appearance_bonus = cfg.get_bool("use_appearance_bonus", m.use_appearance_bonus);
  m.validate();
  return m;
}

AdapterKind parse_adapter_kind(std::string_view text) {
  if (text == "weight") return AdapterKind::kWeight;
  if (text == "clip") return AdapterKind::kClip;
  throw Error(ErrorCode::kConfig, "adapter kind must be 'weight' or 'clip', got '" +
                                      std::string(text) + "'");
}

std::string_view adapter_kind_name(AdapterKind kind) {
  return kind == AdapterKind::kWeight ? "weight" : "clip";
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  RunManifest m;
  m.settings = KeyValueConfig::load(path);
  const auto base = path.parent_path();
  auto resolve = [&](std::string_view key, bool required) -> std::optional<std::filesystem::path> {
    const auto v = m.settings.get(key);
    if (!v) {
      if (required) throw Error(ErrorCode::kConfig, "manifest is missing '" + std::string(key) + "'");
      return std::nullopt;
    }
    std::filesystem::path p(*v);
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) {
      throw Error(ErrorCode::kIo, "manifest entry '" + std::string(key) + "' points to missing " +
                                      p.string());
    }
    return p;
  };
  m.templates = *resolve("templates", true);
  m.queries = *resolve("queries", true);
  m.params = resolve("params", false);
  m.ground_truth = resolve("gt", false);
  m.ground_truth_masks = resolve("gt_masks", false);
  // Range checks for everything the run will consume.
  matcher_config_from(m.settings);
  if (const auto kind = m.settings.get("adapter_kind")) {
    train_config_from(m.settings, parse_adapter_kind(*kind));
  }
  return m;
}

}  // namespace instmatch
