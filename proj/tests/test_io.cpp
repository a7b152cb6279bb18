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

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "instmatch/config.hpp"
#include "instmatch/container.hpp"
#include "instmatch/error.hpp"
#include "instmatch/records.hpp"
#include "test_util.hpp"

using namespace instmatch;

namespace {

ErrorCode parse_error(const std::vector<std::uint8_t>& bytes) {
  try {
    TensorContainer::parse(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected parse to fail");
  return ErrorCode::kInvalidArgument;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Header plus one record header, written byte by byte from the layout.
std::vector<std::uint8_t> handmade(const std::string& name, std::uint8_t dtype,
                                   std::vector<std::uint64_t> dims, std::size_t data_bytes) {
  std::vector<std::uint8_t> out = {'N', 'I', 'D', 'S'};
  put_u32(out, 1);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  out.push_back(dtype);
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u64(out, d);
  out.resize(out.size() + data_bytes, 0xAB);
  return out;
}

TensorContainer sample_container() {
  TensorContainer c;
  const std::vector<double> f = {1.5, -2.25, 3.0, 0.0, 1e-3, 7.0};
  c.add(TensorRecord::from_f64("a/f32", {2, 3}, f));
  c.add(TensorRecord::from_f64("b/f64", {3, 2}, f, DType::kFloat64));
  const std::vector<std::uint8_t> u = {0, 1, 255, 7};
  c.add(TensorRecord::from_u8("c/u8", {2, 2}, u));
  c.add(TensorRecord::from_f64("scalar", {}, std::vector<double>{42.0}, DType::kFloat64));
  return c;
}

}  // namespace

TEST_CASE("container round trip of one 2x3 float32 tensor") {
  TensorContainer c;
  const std::vector<double> v = {1, 2, 3, 4, 5, 6};
  c.add(TensorRecord::from_f64("x", {2, 3}, v));
  const auto bytes = c.serialize();
  const auto back = TensorContainer::parse(bytes);
  CHECK(back == c);
  CHECK(back.serialize() == bytes);
  CHECK(back.get("x").to_f64() == v);
  // 4 magic + 4 version + 4 count + 4 name length + 1 name + 1 dtype + 1 ndim + 16 dims + 24 data.
  CHECK(bytes.size() == 59);
  CHECK(handmade("x", 0, {2, 3}, 0).size() + 24 == bytes.size());
}

TEST_CASE("container byte layout is the documented one") {
  TensorContainer c;
  c.add(TensorRecord::from_u8("m", {2, 2}, std::vector<std::uint8_t>{1, 0, 0, 1}));
  auto expected = handmade("m", 2, {2, 2}, 0);
  expected.insert(expected.end(), {1, 0, 0, 1});
  CHECK(c.serialize() == expected);
}

TEST_CASE("container round trip for every dtype is bit identical") {
  const auto c = sample_container();
  const auto bytes = c.serialize();
  const auto back = TensorContainer::parse(bytes);
  CHECK(back == c);
  CHECK(back.serialize() == bytes);
  CHECK(back.get("b/f64").to_f64() == std::vector<double>{1.5, -2.25, 3.0, 0.0, 1e-3, 7.0});
  CHECK(back.get("a/f32").to_f64()[4] == static_cast<double>(1e-3f));
  CHECK(back.get("c/u8").to_u8() == std::vector<std::uint8_t>{0, 1, 255, 7});
  CHECK(back.get("scalar").to_f64() == std::vector<double>{42.0});

  testutil::TempDir dir("container");
  c.write_file(dir / "c.nids");
  CHECK(TensorContainer::read_file(dir / "c.nids") == c);
}

TEST_CASE("container rejects malformed input") {
  auto good = sample_container().serialize();
  SUBCASE("bad magic") {
    auto b = good;
    std::memcpy(b.data(), "XXXX", 4);
    CHECK(parse_error(b) == ErrorCode::kBadMagic);
  }
  SUBCASE("unsupported version") {
    auto b = good;
    b[4] = 2;
    CHECK(parse_error(b) == ErrorCode::kUnsupportedVersion);
  }
  SUBCASE("4x4 float32 with only 60 data bytes") {
    CHECK(parse_error(handmade("t", 0, {4, 4}, 60)) == ErrorCode::kTruncatedFile);
    CHECK_NOTHROW(TensorContainer::parse(handmade("t", 0, {4, 4}, 64)));
  }
  SUBCASE("unknown dtype") {
    CHECK(parse_error(handmade("t", 7, {1}, 4)) == ErrorCode::kUnknownDtype);
  }
  SUBCASE("duplicate names") {
    auto b = handmade("t", 2, {1}, 1);
    b[8] = 2;  // record count
    const auto second = handmade("t", 2, {1}, 1);
    b.insert(b.end(), second.begin() + 12, second.end());
    CHECK(parse_error(b) == ErrorCode::kDuplicateName);
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.push_back(0);
    CHECK(parse_error(b) == ErrorCode::kCorruptRecord);
  }
  SUBCASE("dims whose byte size overflows") {
    CHECK(parse_error(handmade("t", 1, {1ull << 62, 1ull << 62}, 0)) == ErrorCode::kCorruptRecord);
  }
  SUBCASE("every truncation is rejected") {
    for (std::size_t len = 0; len < good.size(); ++len) {
      const std::vector<std::uint8_t> cut(good.begin(), good.begin() + static_cast<long>(len));
      const auto code = parse_error(cut);
      CHECK((code == ErrorCode::kTruncatedFile || code == ErrorCode::kBadMagic));
    }
  }
}

TEST_CASE("container fuzzed corruption never crashes") {
  const auto good = sample_container().serialize();
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    auto b = good;
    const int flips = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < flips; ++i) b[rng() % b.size()] = static_cast<std::uint8_t>(rng());
    try {
      TensorContainer::parse(b);
    } catch (const Error&) {
    }
  }
}

TEST_CASE("container record management") {
  TensorContainer c;
  c.add(TensorRecord::from_u8("a", {1}, std::vector<std::uint8_t>{1}));
  CHECK_THROWS_AS(c.add(TensorRecord::from_u8("a", {1}, std::vector<std::uint8_t>{2})), Error);
  c.put(TensorRecord::from_u8("a", {1}, std::vector<std::uint8_t>{3}));
  CHECK(c.size() == 1);
  CHECK(c.get("a").to_u8()[0] == 3);
  CHECK(c.find("b") == nullptr);
  try {
    c.get("b");
    FAIL("expected MissingRecord");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingRecord);
  }
  CHECK_THROWS_AS(TensorContainer{}.serialize(), Error);
  CHECK_THROWS_AS(TensorRecord::from_f64("x", {2, 2}, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(c.get("a").to_f64().at(1), std::out_of_range);
  CHECK_THROWS_AS(TensorRecord::from_f64("f", {1}, std::vector<double>{1.0}).to_u8(), Error);
  CHECK_THROWS_AS(TensorContainer::read_file("/nonexistent/instmatch.nids"), Error);
}

TEST_CASE("records round trip") {
  std::vector<LabeledProposal> in(3);
  in[0].image_id = 4;
  in[0].instance_id = 17;
  in[0].score = 0.1 + 0.2;
  in[0].box = {1.25, 2.5, 10.0, 20.0};
  in[0].mask_name = "mask/0";
  in[1].image_id = -2;
  in[1].score = 0.0;
  in[1].box = {0, 0, 1e-7, 3};
  in[2].image_id = 9;
  in[2].instance_id = 0;
  in[2].score = 1.0 / 3.0;
  in[2].box = {-5, -5, 5, 5};
  in[2].mask_name = "gt/12";
  std::stringstream ss;
  write_records(ss, in);
  const auto out = read_records(ss);
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i].image_id == in[i].image_id);
    CHECK(out[i].instance_id == in[i].instance_id);
    CHECK(out[i].score == in[i].score);
    CHECK(out[i].box == in[i].box);
    CHECK(out[i].mask_name == in[i].mask_name);
  }
}

TEST_CASE("records parsing is strict") {
  auto fails = [](const std::string& text) {
    std::stringstream ss(text);
    try {
      read_records(ss);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("expected failure for: " << text);
    return ErrorCode::kInvalidArgument;
  };
  CHECK(fails("1\t2\t0.5\t0\t0\t1\n") == ErrorCode::kCorruptRecord);
  CHECK(fails("1\t2\tabc\t0\t0\t1\t1\tm\n") == ErrorCode::kCorruptRecord);
  CHECK(fails("1\t2\tnan\t0\t0\t1\t1\tm\n") == ErrorCode::kCorruptRecord);
  CHECK(fails("1\t2\t0.5\t3\t0\t1\t1\tm\n") == ErrorCode::kInvalidBox);
  CHECK(fails("x\t2\t0.5\t0\t0\t1\t1\tm\n") == ErrorCode::kCorruptRecord);
  std::stringstream ok("# comment\n\n1\t-1\t0.5\t0\t0\t1\t1\t\r\n");
  const auto r = read_records(ok);
  REQUIRE(r.size() == 1);
  CHECK_FALSE(r[0].instance_id.has_value());
  CHECK(r[0].mask_name.empty());
}

TEST_CASE("ground truth conversion") {
  GroundTruthSet gt;
  gt.objects.push_back({3, 5, {0, 0, 2, 2}, "gt/0", {}});
  gt.objects.push_back({1, 6, {1, 1, 2, 2}, "gt/1", {}});
  const auto recs = ground_truth_to_records(gt);
  CHECK(recs[0].score == 1.0);
  const auto back = ground_truth_from_records(recs);
  CHECK(back.objects.size() == 2);
  CHECK(back.image_ids == std::vector<std::int64_t>{1, 3});
  auto bad = recs;
  bad[0].instance_id.reset();
  CHECK_THROWS_AS(ground_truth_from_records(bad), Error);
}

TEST_CASE("key value config") {
  const auto cfg = KeyValueConfig::parse(
      "# synthetic run\n"
      "sigma = 0.1   # per channel\n"
      "num_instances=6\n"
      "\n"
      "aggregation = avg_k\n"
      "avg_k = 2\n"
      "use_appearance_bonus = true\n"
      "learning_rate = 5e-4\n");
  CHECK(cfg.get("sigma") == std::optional<std::string>("0.1"));
  const auto s = synth_config_from(cfg);
  CHECK(s.sigma == 0.1);
  CHECK(s.num_instances == 6);
  CHECK(s.dim == SynthConfig{}.dim);
  const auto m = matcher_config_from(cfg);
  CHECK(m.aggregation == Aggregation::kAvgTopK);
  CHECK(m.avg_k == 2);
  CHECK(m.use_appearance_bonus);
  const auto w = train_config_from(cfg, AdapterKind::kWeight);
  CHECK(w.learning_rate == 5e-4);
  CHECK(w.batch_size == 1024);
  const auto c = train_config_from(KeyValueConfig{}, AdapterKind::kClip);
  CHECK(c.learning_rate == 1e-4);
  CHECK(c.batch_size == 512);
}

TEST_CASE("key value config rejects bad input") {
  auto code = [](const std::string& text) {
    try {
      const auto cfg = KeyValueConfig::parse(text);
      synth_config_from(cfg);
      matcher_config_from(cfg);
      train_config_from(cfg, AdapterKind::kWeight);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("expected failure for: " << text);
    return ErrorCode::kInvalidArgument;
  };
  CHECK(code("unknown_key = 1") == ErrorCode::kConfig);
  CHECK(code("sigma") == ErrorCode::kConfig);
  CHECK(code("sigma = 1\nsigma = 2") == ErrorCode::kConfig);
  CHECK(code("sigma = abc") == ErrorCode::kConfig);
  CHECK(code("sigma = -1") == ErrorCode::kConfig);
  CHECK(code("num_instances = -3") == ErrorCode::kConfig);
  CHECK(code("aggregation = median") == ErrorCode::kConfig);
  CHECK(code("assignment = greedy") == ErrorCode::kConfig);
  CHECK(code("delta = 1.5") == ErrorCode::kConfig);
  CHECK(code("use_appearance_bonus = maybe") == ErrorCode::kConfig);
  CHECK(code("temperature = 0") == ErrorCode::kConfig);
  CHECK(code("dropout_rate = 1") == ErrorCode::kConfig);
  CHECK(code("alpha = 2") == ErrorCode::kConfig);
  CHECK_THROWS_AS(parse_adapter_kind("mlp"), Error);
  CHECK(parse_adapter_kind("clip") == AdapterKind::kClip);
  CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/instmatch.cfg"), Error);
}

TEST_CASE("run manifest resolves paths relative to its directory") {
  testutil::TempDir dir("manifest");
  std::ofstream(dir / "t.nids") << "x";
  std::ofstream(dir / "q.nids") << "x";
  {
    std::ofstream m(dir / "run.cfg");
    m << "templates = t.nids\nqueries = " << (dir / "q.nids").string()
      << "\ndelta = 0.2\nseed = 3\n";
  }
  const auto m = RunManifest::load(dir / "run.cfg");
  CHECK(m.templates == dir / "t.nids");
  CHECK(m.queries == dir / "q.nids");
  CHECK_FALSE(m.params.has_value());
  CHECK(matcher_config_from(m.settings).delta == 0.2);

  std::ofstream(dir / "missing.cfg") << "templates = t.nids\nqueries = nope.nids\n";
  try {
    RunManifest::load(dir / "missing.cfg");
    FAIL("expected Io");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
  std::ofstream(dir / "incomplete.cfg") << "templates = t.nids\n";
  CHECK_THROWS_AS(RunManifest::load(dir / "incomplete.cfg"), Error);
  std::ofstream(dir / "range.cfg") << "templates = t.nids\nqueries = q.nids\ndelta = 3\n";
  CHECK_THROWS_AS(RunManifest::load(dir / "range.cfg"), Error);
}
