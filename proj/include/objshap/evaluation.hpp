/*
 * Copyright 2026 The objshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "objshap/attribution.hpp"
#include "objshap/error.hpp"
#include "objshap/gateway.hpp"
#include "objshap/scene.hpp"
#include "objshap/stats.hpp"

namespace objshap {

struct EvalEntry {
  Scene scene;  // prompt holds the question
  std::size_t target_id = 0;
  Box target_bbox;
};

// One dataset line: {"scene": {...}, "question": "...",
//                    "target": {"id": i, "bbox": [x, y, w, h]}}.
// Scene image references resolve against base_dir.
inline EvalEntry parse_eval_entry(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir) {
  if (!doc.is_object() || !doc.contains("scene") || !doc.contains("target")) {
    throw Error(ErrorCode::kSchemaError, "entry needs scene and target");
  }
  const auto& scene_doc = doc.at("scene");
  if (!scene_doc.is_object() || !scene_doc.contains("image") ||
      !scene_doc["image"].is_string()) {
    throw Error(ErrorCode::kSchemaError, "scene.image must be a path");
  }
  const std::filesystem::path ref = scene_doc["image"].get<std::string>();
  const auto image_path = ref.is_absolute() ? ref : base_dir / ref;

  EvalEntry entry;
  entry.scene = load_scene(DecodePng(ReadFileBytes(image_path)), scene_doc,
                           base_dir);
  try {
    if (doc.contains("question")) {
      entry.scene.prompt = doc.at("question").get<std::string>();
    }
    const auto& target = doc.at("target");
    entry.target_id = target.at("id").get<std::size_t>();
    const auto& b = target.at("bbox");
    if (!b.is_array() || b.size() != 4) {
      throw Error(ErrorCode::kSchemaError, "target.bbox must be [x, y, w, h]");
    }
    entry.target_bbox = Box::FromXywh(b[0].get<int>(), b[1].get<int>(),
                                      b[2].get<int>(), b[3].get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  }
  if (entry.target_id >= entry.scene.size()) {
    throw Error(ErrorCode::kSchemaError,
                "target id " + std::to_string(entry.target_id) +
                    " out of range for " + std::to_string(entry.scene.size()) +
                    " objects");
  }
  if (!entry.target_bbox.within(entry.scene.image.width(),
                                entry.scene.image.height())) {
    throw Error(ErrorCode::kSchemaError, "target bbox outside the image");
  }
  if (entry.scene.prompt.empty()) {
    throw Error(ErrorCode::kSchemaError, "entry has no question");
  }
  return entry;
}

// JSONL dataset. Errors name the 1-based line number. Blank lines are skipped.
inline std::vector<EvalEntry> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<EvalEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      EvalEntry entry =
          parse_eval_entry(nlohmann::json::parse(line), path.parent_path());
      if (entry.scene.id.empty()) {
        entry.scene.id = path.stem().string() + "_" + std::to_string(line_no);
      }
      entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError, path.string() + " line " +
                                               std::to_string(line_no) + ": " +
                                               e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + " line " + std::to_string(line_no) +
                                ": " + e.what());
    }
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Metrics

inline int recall_at_k(const std::vector<std::size_t>& ranking,
                       std::size_t target_id, std::size_t k) {
  const std::size_t limit = std::min(k, ranking.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranking[i] == target_id) return 1;
  }
  return 0;
}

inline double iou(const Box& a, const Box& b) {
  const long long ix = std::max(0, std::min(a.x_max, b.x_max) -
                                       std::max(a.x_min, b.x_min));
  const long long iy = std::max(0, std::min(a.y_max, b.y_max) -
                                       std::max(a.y_min, b.y_min));
  const long long inter = ix * iy;
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// Percentage drop of v after masking; larger means a more important object.
inline double similarity_drop(std::string_view reference,
                              std::string_view masked, ModelGateway& gateway) {
  return 100.0 * (1.0 - gateway.value_of(reference, masked));
}

// Ids by bbox area, largest first; ties to the lower id.
inline std::vector<std::size_t> rank_by_area(const Scene& scene) {
  std::vector<std::size_t> ids(scene.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return scene.objects[a].bbox.area() > scene.objects[b].bbox.area();
  });
  return ids;
}

inline double center_distance(const Scene& scene, const ObjectEntity& obj) {
  const double cx = 0.5 * scene.image.width();
  const double cy = 0.5 * scene.image.height();
  return std::hypot(obj.bbox.center_x() - cx, obj.bbox.center_y() - cy);
}

// Ids by bbox-center distance to the image center, closest first.
inline std::vector<std::size_t> rank_by_centrality(const Scene& scene) {
  std::vector<double> dist(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    dist[i] = center_distance(scene, scene.objects[i]);
  }
  std::vector<std::size_t> ids(scene.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b];
  });
  return ids;
}

inline std::size_t baseline_largest(const Scene& scene) {
  return rank_by_area(scene).front();
}

inline std::size_t baseline_central(const Scene& scene) {
  return rank_by_centrality(scene).front();
}

// ---------------------------------------------------------------------------
// Evaluation runs

enum class MethodKind { kPixelShap, kBaselineLargest, kBaselineCentral };

inline std::optional<MethodKind> ParseMethod(std::string_view name) {
  if (name == "pixelshap") return MethodKind::kPixelShap;
  if (name == "baseline-largest") return MethodKind::kBaselineLargest;
  if (name == "baseline-central") return MethodKind::kBaselineCentral;
  return std::nullopt;
}

inline std::string_view MethodName(MethodKind kind) {
  switch (kind) {
    case MethodKind::kPixelShap: return "pixelshap";
    case MethodKind::kBaselineLargest: return "baseline-largest";
    case MethodKind::kBaselineCentral: return "baseline-central";
  }
  return "?";
}

struct MethodConfig {
  MethodKind kind = MethodKind::kPixelShap;
  // Baselines use attribution.strategy only to mask their pick for the
  // similarity-drop measurement.
  AttributionConfig attribution;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe Summarize(const std::vector<double>& xs) {
  return {stats::Mean(xs), stats::StandardError(xs)};
}

struct MetricsRow {
  std::string model;
  std::string masking;
  std::size_t entries = 0;
  std::vector<std::size_t> omitted;
  MeanSe comp_time_s;
  MeanSe sim_drop;
  MeanSe iou1_pct;
  MeanSe recall1_pct;
  MeanSe recall2_pct;
  MeanSe recall3_pct;
};

struct EvaluationOutput {
  MetricsRow row;
  std::vector<nlohmann::json> trace;  // one object per entry, dataset order
  std::size_t attribution_queries = 0;
  std::size_t measurement_queries = 0;
};

// Builds the gateway used for one entry; lets mock VLMs bind to the scene.
using GatewayFactory =
    std::function<std::unique_ptr<ModelGateway>(const Scene& scene)>;

struct EvaluationOptions {
  bool skip_failures = false;
};

namespace detail {

inline void AddMetric(nlohmann::json& doc, const char* key, const MeanSe& m) {
  doc[key] = {{"mean", m.mean}, {"se", m.se}};
}

}  // namespace detail

inline nlohmann::json metrics_to_json(const MetricsRow& row) {
  nlohmann::json doc = {{"model", row.model},
                        {"masking", row.masking},
                        {"entries", row.entries},
                        {"omitted", row.omitted}};
  detail::AddMetric(doc, "comp_time_s", row.comp_time_s);
  detail::AddMetric(doc, "sim_drop", row.sim_drop);
  detail::AddMetric(doc, "iou_at_1_pct", row.iou1_pct);
  detail::AddMetric(doc, "recall_at_1_pct", row.recall1_pct);
  detail::AddMetric(doc, "recall_at_2_pct", row.recall2_pct);
  detail::AddMetric(doc, "recall_at_3_pct", row.recall3_pct);
  return doc;
}

inline EvaluationOutput run_evaluation(const std::vector<EvalEntry>& dataset,
                                       const MethodConfig& method,
                                       const GatewayFactory& make_gateway,
                                       const EvaluationOptions& options = {}) {
  if (dataset.empty()) {
    throw Error(ErrorCode::kPrecondition, "evaluation dataset is empty");
  }
  EvaluationOutput out;
  std::vector<double> times, drops, ious, r1, r2, r3;
  std::string model_id;

  for (std::size_t index = 0; index < dataset.size(); ++index) {
    const EvalEntry& entry = dataset[index];
    const Scene& scene = entry.scene;
    nlohmann::json trace = {{"index", index},
                            {"scene", scene.id},
                            {"target", entry.target_id}};
    try {
      auto gateway = make_gateway(scene);
      if (model_id.empty()) model_id = gateway->vlm().model_id();

      std::vector<std::size_t> ranking;
      double comp_time = 0.0;
      double drop = 0.0;
      std::size_t attribution_queries = 0;

      if (method.kind == MethodKind::kPixelShap) {
        const AttributionRun run =
            attribute(scene, scene.prompt, *gateway, method.attribution);
        ranking = run.result.ranking;
        comp_time = run.result.elapsed_s;
        attribution_queries = run.vlm_queries;
        trace["phi"] = run.result.phi;
        trace["estimator"] = EstimatorName(run.result.estimator);
        trace["fingerprint"] = run.result.config_fingerprint;

        const Coalition without_top =
            Coalition::Full(scene.size()).without(ranking.front());
        const auto it = std::find_if(
            run.records.begin(), run.records.end(),
            [&](const PerturbationRecord& r) {
              return r.coalition == without_top;
            });
        if (it != run.records.end()) {
          drop = 100.0 * (1.0 - it->value);
        } else {
          const Image masked =
              apply_masking(scene, without_top, method.attribution.strategy);
          drop = similarity_drop(run.reference_response,
                                 gateway->query(masked, scene.prompt),
                                 *gateway);
        }
      } else {
        const std::size_t before = gateway->counters().vlm_queries;
        const auto start = std::chrono::steady_clock::now();
        ranking = method.kind == MethodKind::kBaselineLargest
                      ? rank_by_area(scene)
                      : rank_by_centrality(scene);
        const double wall = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - start)
                                .count();
        attribution_queries = gateway->counters().vlm_queries - before;
        comp_time = method.attribution.timing.logical
                        ? static_cast<double>(attribution_queries) *
                              method.attribution.timing.per_query_s
                        : wall;

        const std::size_t measure_before = gateway->counters().vlm_queries;
        const std::string reference =
            gateway->query(scene.image, scene.prompt);
        const Image masked = apply_masking(
            scene, Coalition::Full(scene.size()).without(ranking.front()),
            method.attribution.strategy);
        drop = similarity_drop(reference, gateway->query(masked, scene.prompt),
                               *gateway);
        out.measurement_queries +=
            gateway->counters().vlm_queries - measure_before;
      }
      out.attribution_queries += attribution_queries;

      const std::size_t top1 = ranking.front();
      const double overlap = iou(scene.objects[top1].bbox, entry.target_bbox);
      const int rec1 = recall_at_k(ranking, entry.target_id, 1);
      const int rec2 = recall_at_k(ranking, entry.target_id, 2);
      const int rec3 = recall_at_k(ranking, entry.target_id, 3);

      trace["ranking"] = ranking;
      trace["top1"] = top1;
      trace["iou_at_1"] = overlap;
      trace["recall_at_1"] = rec1;
      trace["recall_at_2"] = rec2;
      trace["recall_at_3"] = rec3;
      trace["sim_drop"] = drop;
      trace["comp_time_s"] = comp_time;
      trace["attribution_queries"] = attribution_queries;

      times.push_back(comp_time);
      drops.push_back(drop);
      ious.push_back(100.0 * overlap);
      r1.push_back(100.0 * rec1);
      r2.push_back(100.0 * rec2);
      r3.push_back(100.0 * rec3);
    } catch (const Error& e) {
      if (!options.skip_failures) throw;
      trace["error"] = e.what();
      out.row.omitted.push_back(index);
    }
    out.trace.push_back(std::move(trace));
  }

  out.row.model = method.kind == MethodKind::kPixelShap
                      ? model_id
                      : std::string(method.kind == MethodKind::kBaselineLargest
                                        ? "Largest"
                                        : "Central");
  out.row.masking = method.kind == MethodKind::kPixelShap
                        ? std::string(MaskingKindName(
                              method.attribution.strategy.kind))
                        : "baseline";
  out.row.entries = times.size();
  out.row.comp_time_s = Summarize(times);
  out.row.sim_drop = Summarize(drops);
  out.row.iou1_pct = Summarize(ious);
  out.row.recall1_pct = Summarize(r1);
  out.row.recall2_pct = Summarize(r2);
  out.row.recall3_pct = Summarize(r3);
  return out;
}

// Aligned text table with the same column order as the published results.
inline std::string format_metrics_table(const std::vector<MetricsRow>& rows) {
  const std::vector<std::string> header = {
      "Model",    "Masking",      "Comp. Time (s)", "Sim. Drop",
      "IoU@1 (%)", "Recall@1 (%)", "Recall@2 (%)",  "Recall@3 (%)"};
  auto cell = [](const MeanSe& m) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f +/- %.2f", m.mean, m.se);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> table{header};
  for (const auto& r : rows) {
    table.push_back({r.model, r.masking, cell(r.comp_time_s), cell(r.sim_drop),
                     cell(r.iou1_pct), cell(r.recall1_pct),
                     cell(r.recall2_pct), cell(r.recall3_pct)});
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      if (c > 0) os << " | ";
      os << table[r][c] << std::string(widths[c] - table[r][c].size(), ' ');
    }
    os << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c > 0) os << "-+-";
        os << std::string(widths[c], '-');
      }
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace objshap
