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

#include "instmatch/records.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>

#include "instmatch/error.hpp"

namespace instmatch {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no, const char* what) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kCorruptRecord, "line " + std::to_string(line_no) + ": bad " + what +
                                               " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

void write_records(std::ostream& out, std::span<const LabeledProposal> records) {
  for (const auto& r : records) {
    out << r.image_id << '\t' << (r.instance_id ? *r.instance_id : -1) << '\t'
        << format_double(r.score) << '\t' << format_double(r.box.x_min) << '\t'
        << format_double(r.box.y_min) << '\t' << format_double(r.box.x_max) << '\t'
        << format_double(r.box.y_max) << '\t' << r.mask_name << '\n';
  }
}

void write_records(const std::filesystem::path& path, std::span<const LabeledProposal> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_records(out, records);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<LabeledProposal> read_records(std::istream& in) {
  std::vector<LabeledProposal> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 8) {
      throw Error(ErrorCode::kCorruptRecord, "line " + std::to_string(line_no) + ": expected 8 fields, got " +
                                                 std::to_string(fields.size()));
    }
    LabeledProposal r;
    r.image_id = parse_field<std::int64_t>(fields[0], line_no, "image_id");
    const auto id = parse_field<std::int64_t>(fields[1], line_no, "instance_id");
    if (id >= 0) r.instance_id = id;
    r.score = parse_field<double>(fields[2], line_no, "score");
    r.box.x_min = parse_field<double>(fields[3], line_no, "x_min");
    r.box.y_min = parse_field<double>(fields[4], line_no, "y_min");
    r.box.x_max = parse_field<double>(fields[5], line_no, "x_max");
    r.box.y_max = parse_field<double>(fields[6], line_no, "y_max");
    r.mask_name = std::string(fields[7]);
    if (!std::isfinite(r.score)) {
      throw Error(ErrorCode::kCorruptRecord, "line " + std::to_string(line_no) + ": score is not finite");
    }
    if (!r.box.valid()) {
      throw Error(ErrorCode::kInvalidBox, "line " + std::to_string(line_no) + ": box must satisfy min < max");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabeledProposal> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_records(in);
}

GroundTruthSet ground_truth_from_records(std::span<const LabeledProposal> records) {
  GroundTruthSet gt;
  std::set<std::int64_t> images;
  for (const auto& r : records) {
    if (!r.instance_id) {
      throw Error(ErrorCode::kCorruptRecord, "ground truth record without an instance id");
    }
    gt.objects.push_back({r.image_id, *r.instance_id, r.box, r.mask_name, r.mask});
    images.insert(r.image_id);
  }
  gt.image_ids.assign(images.begin(), images.end());
  return gt;
}

std::vector<LabeledProposal> ground_truth_to_records(const GroundTruthSet& gt) {
  std::vector<LabeledProposal> out;
  out.reserve(gt.objects.size());
  for (const auto& g : gt.objects) {
    LabeledProposal r;
    r.image_id = g.image_id;
    r.box = g.box;
    r.mask_name = g.mask_name;
    r.mask = g.mask;
    r.instance_id = g.instance_id;
    r.score = 1.0;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace instmatch
