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

#include "instmatch/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "instmatch/error.hpp"
#include "instmatch/records.hpp"

namespace instmatch {
namespace {

constexpr const char* kPatches = "grids/patches";
constexpr const char* kForeground = "grids/foreground";
constexpr const char* kEmbeddings = "embeddings";

std::string query_mask_name(std::size_t q) { return "mask/" + std::to_string(q); }

void require_rank(const TensorRecord& r, std::size_t ndim) {
  if (r.dims.size() != ndim) {
    throw Error(ErrorCode::kDimMismatch, "record '" + r.name + "' must have " +
                                             std::to_string(ndim) + " dimensions, has " +
                                             std::to_string(r.dims.size()));
  }
}

std::int64_t to_id(double v, const std::string& what) {
  if (!std::isfinite(v) || v != std::floor(v) || std::fabs(v) > 9007199254740992.0) {
    throw Error(ErrorCode::kCorruptRecord, what + " must hold integers");
  }
  return static_cast<std::int64_t>(v);
}

std::vector<std::int64_t> ids_from(const TensorRecord& r) {
  require_rank(r, 1);
  std::vector<std::int64_t> out;
  for (double v : r.to_f64()) out.push_back(to_id(v, "'" + r.name + "'"));
  return out;
}

TensorRecord ids_to(std::string name, std::span<const std::int64_t> ids) {
  std::vector<double> v(ids.begin(), ids.end());
  return TensorRecord::from_f64(std::move(name), {v.size()}, v, DType::kFloat64);
}

// Splits grid records whose leading `lead` dims index items.
std::vector<PatchGrid> grids_from(const TensorContainer& c, std::size_t lead) {
  const auto* patches = c.find(kPatches);
  const auto* fg = c.find(kForeground);
  if (patches == nullptr && fg == nullptr) return {};
  if (patches == nullptr || fg == nullptr) {
    throw Error(ErrorCode::kMissingRecord, "grid patches and foreground must appear together");
  }
  require_rank(*patches, lead + 3);
  require_rank(*fg, lead + 2);
  for (std::size_t i = 0; i < lead + 2; ++i) {
    if (patches->dims[i] != fg->dims[i]) {
      throw Error(ErrorCode::kDimMismatch, "grid patches and foreground shapes disagree");
    }
  }
  std::size_t items = 1;
  for (std::size_t i = 0; i < lead; ++i) items *= patches->dims[i];
  const std::size_t h = patches->dims[lead];
  const std::size_t w = patches->dims[lead + 1];
  const std::size_t dim = patches->dims[lead + 2];
  const auto values = patches->to_f64();
  const auto mask = fg->to_u8();
  const std::size_t cells = h * w;
  std::vector<PatchGrid> out;
  out.reserve(items);
  for (std::size_t i = 0; i < items; ++i) {
    const auto* v0 = values.data() + i * cells * dim;
    const auto* m0 = mask.data() + i * cells;
    out.emplace_back(h, w, dim, std::vector<double>(v0, v0 + cells * dim),
                     std::vector<std::uint8_t>(m0, m0 + cells));
  }
  return out;
}

void grids_to(TensorContainer& c, std::vector<std::uint64_t> lead, std::span<const PatchGrid> grids) {
  if (grids.empty()) return;
  const auto& g0 = grids.front();
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  for (const auto& g : grids) {
    if (g.height() != g0.height() || g.width() != g0.width() || g.dim() != g0.dim()) {
      throw Error(ErrorCode::kDimMismatch, "all grids in one container must share a shape");
    }
    values.insert(values.end(), g.patches().begin(), g.patches().end());
    mask.insert(mask.end(), g.foreground().begin(), g.foreground().end());
  }
  auto pdims = lead;
  pdims.insert(pdims.end(), {g0.height(), g0.width(), g0.dim()});
  auto fdims = lead;
  fdims.insert(fdims.end(), {g0.height(), g0.width()});
  c.add(TensorRecord::from_f64(kPatches, pdims, values));
  c.add(TensorRecord::from_u8(kForeground, fdims, mask));
}

std::vector<Embedding> embeddings_from(const TensorContainer& c, std::size_t lead,
                                       std::size_t expected_items) {
  const auto* r = c.find(kEmbeddings);
  if (r == nullptr) return {};
  require_rank(*r, lead + 1);
  const std::size_t dim = r->dims.back();
  const auto values = r->to_f64();
  const std::size_t items = dim == 0 ? 0 : values.size() / dim;
  if (items != expected_items) {
    throw Error(ErrorCode::kDimMismatch, "'embeddings' holds " + std::to_string(items) +
                                             " rows, expected " + std::to_string(expected_items));
  }
  std::vector<Embedding> out;
  out.reserve(items);
  for (std::size_t i = 0; i < items; ++i) {
    out.emplace_back(std::vector<double>(values.begin() + i * dim, values.begin() + (i + 1) * dim));
  }
  return out;
}

std::vector<Embedding> pool_all(std::span<const PatchGrid> grids) {
  std::vector<Embedding> out;
  out.reserve(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) {
    try {
      out.push_back(ffa_pool(grids[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "grid " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

bool marked_refined(const TensorContainer& c) {
  const auto* r = c.find(kRefinedMarker);
  if (r == nullptr) return false;
  const auto v = r->to_f64();
  return !v.empty() && v.front() != 0.0;
}

Mask mask_from(const TensorRecord& r) {
  require_rank(r, 2);
  return Mask{r.dims[0], r.dims[1], r.to_u8()};
}

TensorRecord mask_to(std::string name, const Mask& m) {
  return TensorRecord::from_u8(std::move(name), {m.height, m.width}, m.bits);
}

void write_container(const TensorContainer& c, const std::filesystem::path& path) {
  c.write_file(path);
}

}  // namespace

TemplateSet TemplateData::template_set() const {
  return TemplateSet(instance_ids, views, embeddings);
}

TensorContainer templates_to_container(std::span<const std::int64_t> instance_ids,
                                       std::size_t views, std::span<const PatchGrid> grids) {
  if (grids.size() != instance_ids.size() * views) {
    throw Error(ErrorCode::kDimMismatch, "expected N*K template grids");
  }
  TensorContainer c;
  c.add(ids_to("instance_ids", instance_ids));
  grids_to(c, {instance_ids.size(), views}, grids);
  return c;
}

TemplateData templates_from_container(const TensorContainer& c) {
  TemplateData t;
  t.instance_ids = ids_from(c.get("instance_ids"));
  const std::size_t n = t.instance_ids.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "template container has no instances");
  t.grids = grids_from(c, 2);
  if (const auto* e = c.find(kEmbeddings)) {
    require_rank(*e, 3);
    t.views = e->dims[1];
  } else if (!t.grids.empty()) {
    t.views = c.get(kPatches).dims[1];
  } else {
    throw Error(ErrorCode::kMissingRecord, "templates need 'embeddings' or grid records");
  }
  if (!t.grids.empty() && c.get(kPatches).dims[0] != n) {
    throw Error(ErrorCode::kDimMismatch, "template grids disagree with 'instance_ids'");
  }
  if (!t.grids.empty() && t.grids.size() != n * t.views) {
    throw Error(ErrorCode::kDimMismatch, "template grids and embeddings disagree on K");
  }
  t.embeddings = embeddings_from(c, 2, n * t.views);
  if (t.embeddings.empty()) t.embeddings = pool_all(t.grids);
  t.refined = marked_refined(c);
  return t;
}

TensorContainer queries_to_container(std::span<const SynthQuery> queries) {
  TensorContainer c;
  std::vector<std::int64_t> ids;
  std::vector<double> boxes;
  std::vector<PatchGrid> grids;
  for (const auto& q : queries) {
    ids.push_back(q.image_id);
    boxes.insert(boxes.end(), {q.box.x_min, q.box.y_min, q.box.x_max, q.box.y_max});
    grids.push_back(q.grid);
  }
  c.add(ids_to("image_ids", ids));
  c.add(TensorRecord::from_f64("boxes", {queries.size(), 4}, boxes, DType::kFloat64));
  grids_to(c, {queries.size()}, grids);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (queries[q].mask.is_raster()) c.add(mask_to(query_mask_name(q), queries[q].mask));
  }
  return c;
}

QueryData queries_from_container(const TensorContainer& c) {
  QueryData d;
  d.image_ids = ids_from(c.get("image_ids"));
  const std::size_t q = d.image_ids.size();
  const auto& boxes = c.get("boxes");
  require_rank(boxes, 2);
  if (boxes.dims[0] != q || boxes.dims[1] != 4) {
    throw Error(ErrorCode::kDimMismatch, "'boxes' must be [Q,4]");
  }
  const auto b = boxes.to_f64();
  for (std::size_t i = 0; i < q; ++i) {
    d.boxes.push_back({b[4 * i], b[4 * i + 1], b[4 * i + 2], b[4 * i + 3]});
  }
  d.grids = grids_from(c, 1);
  if (!d.grids.empty() && d.grids.size() != q) {
    throw Error(ErrorCode::kDimMismatch, "query grids disagree with 'image_ids'");
  }
  d.embeddings = embeddings_from(c, 1, q);
  if (d.embeddings.empty()) {
    if (d.grids.empty() && q > 0) {
      throw Error(ErrorCode::kMissingRecord, "queries need 'embeddings' or grid records");
    }
    d.embeddings = pool_all(d.grids);
  }
  for (std::size_t i = 0; i < q; ++i) {
    const auto name = query_mask_name(i);
    d.mask_names.push_back(c.contains(name) ? name : std::string());
  }
  d.refined = marked_refined(c);
  return d;
}

TensorContainer ground_truth_masks(const GroundTruthSet& gt) {
  TensorContainer c;
  for (const auto& g : gt.objects) {
    if (g.mask.is_raster() && !g.mask_name.empty()) c.add(mask_to(g.mask_name, g.mask));
  }
  return c;
}

SynthPaths write_synth(const SynthDataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  SynthPaths p{dir / "templates.nids", dir / "queries.nids", dir / "gt.tsv", dir / "gt_masks.nids"};
  write_container(templates_to_container(data.instance_ids, data.templates.templates_per_instance(),
                                         data.template_grids),
                  p.templates);
  write_container(queries_to_container(data.queries), p.queries);
  const auto gt = ground_truth_to_records(data.ground_truth);
  write_records(p.ground_truth, gt);
  write_container(ground_truth_masks(data.ground_truth), p.ground_truth_masks);
  return p;
}

TensorContainer adapter_to_container(const Adapter& adapter) {
  adapter.params.validate();
  TensorContainer c;
  const auto& p = adapter.params;
  c.add(TensorRecord::from_f64("w1", {p.hidden, p.dim}, p.w1, DType::kFloat64));
  c.add(TensorRecord::from_f64("b1", {p.hidden}, p.b1, DType::kFloat64));
  c.add(TensorRecord::from_f64("w2", {p.dim, p.hidden}, p.w2, DType::kFloat64));
  c.add(TensorRecord::from_f64("b2", {p.dim}, p.b2, DType::kFloat64));
  const std::uint8_t kind = adapter.kind == AdapterKind::kWeight ? 0 : 1;
  c.add(TensorRecord::from_u8("kind", {1}, std::span(&kind, 1)));
  c.add(TensorRecord::from_f64("beta", {1}, std::span(&adapter.beta, 1), DType::kFloat64));
  c.add(TensorRecord::from_f64("alpha", {1}, std::span(&adapter.alpha, 1), DType::kFloat64));
  return c;
}

Adapter adapter_from_container(const TensorContainer& c) {
  Adapter a;
  const auto& w1 = c.get("w1");
  require_rank(w1, 2);
  a.params.hidden = w1.dims[0];
  a.params.dim = w1.dims[1];
  a.params.w1 = w1.to_f64();
  a.params.b1 = c.get("b1").to_f64();
  a.params.w2 = c.get("w2").to_f64();
  a.params.b2 = c.get("b2").to_f64();
  try {
    a.params.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kDimMismatch, std::string("adapter parameters: ") + e.what());
  }
  const auto kind = c.get("kind").to_u8();
  if (kind.size() != 1 || kind[0] > 1) {
    throw Error(ErrorCode::kCorruptRecord, "'kind' must be a single 0 (weight) or 1 (clip)");
  }
  a.kind = kind[0] == 0 ? AdapterKind::kWeight : AdapterKind::kClip;
  a.beta = c.get("beta").to_f64().at(0);
  a.alpha = c.get("alpha").to_f64().at(0);
  if (a.kind == AdapterKind::kWeight) {
    WeightAdapterConfig{a.beta, a.params.dim}.validate();
  } else {
    ClipAdapterConfig{a.alpha, a.params.dim}.validate();
  }
  return a;
}

TensorContainer refine_container(const Adapter& adapter, const TensorContainer& in) {
  if (marked_refined(in)) {
    throw Error(ErrorCode::kInvalidArgument, "container is already refined");
  }
  std::size_t lead = 0;
  std::vector<std::uint64_t> lead_dims;
  if (const auto* e = in.find(kEmbeddings)) {
    lead = e->dims.size() - 1;
    lead_dims.assign(e->dims.begin(), e->dims.end() - 1);
  } else if (const auto* p = in.find(kPatches)) {
    if (p->dims.size() < 3) throw Error(ErrorCode::kDimMismatch, "grid patches need rank >= 3");
    lead = p->dims.size() - 3;
    lead_dims.assign(p->dims.begin(), p->dims.begin() + static_cast<std::ptrdiff_t>(lead));
  } else {
    throw Error(ErrorCode::kMissingRecord, "nothing to refine: no 'embeddings' or grid records");
  }
  std::size_t items = 1;
  for (auto d : lead_dims) items *= d;
  auto raw = embeddings_from(in, lead, items);
  if (raw.empty()) raw = pool_all(grids_from(in, lead));
  std::vector<double> out;
  for (const auto& f : raw) {
    if (f.dim() != adapter.dim()) {
      throw Error(ErrorCode::kDimMismatch, "embedding dim " + std::to_string(f.dim()) +
                                               " differs from adapter dim " +
                                               std::to_string(adapter.dim()));
    }
    const auto r = adapter.apply(f);
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  TensorContainer result = in;
  auto dims = lead_dims;
  dims.push_back(adapter.dim());
  result.put(TensorRecord::from_f64(kEmbeddings, dims, out));
  const std::uint8_t one = 1;
  result.put(TensorRecord::from_u8(kRefinedMarker, {1}, std::span(&one, 1)));
  return result;
}

std::vector<LabeledProposal> match_queries(const TemplateData& templates, const QueryData& queries,
                                           const std::optional<Adapter>& adapter,
                                           const MatcherConfig& cfg) {
  cfg.validate();
  if (adapter && (templates.refined || queries.refined)) {
    throw Error(ErrorCode::kInvalidArgument,
                "adapter parameters given but embeddings are already refined");
  }
  if (cfg.use_appearance_bonus && (templates.grids.empty() || queries.grids.empty())) {
    throw Error(ErrorCode::kMissingRecord, "the appearance bonus needs raw grids on both sides");
  }
  TemplateSet tset = templates.template_set();
  std::vector<Embedding> q_emb = queries.embeddings;
  if (adapter) {
    std::vector<Embedding> refined;
    for (const auto& e : tset.embeddings()) refined.push_back(adapter->apply(e));
    tset = TemplateSet(templates.instance_ids, templates.views, std::move(refined));
    for (auto& e : q_emb) e = adapter->apply(e);
  }

  std::map<std::int64_t, std::vector<std::size_t>> by_image;
  for (std::size_t q = 0; q < queries.size(); ++q) by_image[queries.image_ids[q]].push_back(q);

  std::vector<LabeledProposal> out(queries.size());
  for (const auto& [image, members] : by_image) {
    std::vector<Embedding> emb;
    std::vector<PatchGrid> grids;
    for (auto q : members) {
      emb.push_back(q_emb[q]);
      if (cfg.use_appearance_bonus) grids.push_back(queries.grids[q]);
    }
    ScoreTensor scores = aggregate(score_templates(emb, tset), cfg);
    if (cfg.use_appearance_bonus) {
      scores = apply_bonus(scores, appearance_scores(grids, templates.grids, scores));
    }
    const auto assignment = cfg.assignment == Assignment::kStable
                                ? assign_stable(scores.instance_scores)
                                : assign_argmax(scores.instance_scores);
    for (std::size_t i = 0; i < members.size(); ++i) {
      const std::size_t q = members[i];
      auto& p = out[q];
      p.image_id = image;
      p.box = queries.boxes[q];
      p.mask_name = queries.mask_names.empty() ? std::string() : queries.mask_names[q];
      if (assignment[i].instance) {
        p.instance_id = templates.instance_ids[*assignment[i].instance];
        p.score = assignment[i].score;
      }
    }
  }
  return threshold_filter(std::move(out), cfg.delta);
}

void attach_masks(std::span<LabeledProposal> records, const TensorContainer& masks) {
  for (auto& r : records) {
    if (r.mask_name.empty()) continue;
    r.mask = mask_from(masks.get(r.mask_name));
  }
}

void write_loss_csv(const std::filesystem::path& path, std::span<const double> loss_history) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < loss_history.size(); ++i) {
    out << i << ',' << loss_history[i] << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string ap_report_json(const ApResult& result, EvalMode mode, std::size_t predictions,
                           std::size_t ground_truth) {
  nlohmann::ordered_json j;
  j["mode"] = mode == EvalMode::kBox ? "box" : "mask";
  j["ap"] = result.ap;
  j["ap50"] = result.ap50;
  j["ap75"] = result.ap75;
  auto per = nlohmann::ordered_json::object();
  for (std::size_t t = 0; t < kNumIouThresholds; ++t) {
    char key[8];
    std::snprintf(key, sizeof key, "%.2f", iou_threshold(t));
    per[key] = result.ap_per_threshold[t];
  }
  j["ap_per_iou"] = per;
  j["num_predictions"] = predictions;
  j["num_ground_truth"] = ground_truth;
  return j.dump(2) + "\n";
}

EvalMode parse_eval_mode(std::string_view text) {
  if (text == "box") return EvalMode::kBox;
  if (text == "mask") return EvalMode::kMask;
  throw Error(ErrorCode::kConfig, "eval mode must be 'box' or 'mask', got '" + std::string(text) + "'");
}

}  // namespace instmatch
