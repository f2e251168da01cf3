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

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "objshap/digest.hpp"
#include "objshap/gateway.hpp"
#include "objshap/image.hpp"
#include "objshap/masking.hpp"
#include "objshap/sampler.hpp"
#include "objshap/scene.hpp"
#include "objshap/shapley.hpp"

namespace objshap {

// How elapsed time is reported. The logical clock charges a fixed latency per
// VLM query so offline runs stay byte-reproducible.
struct TimingModel {
  bool logical = false;
  double per_query_s = 0.0;
};

struct AttributionConfig {
  MaskingStrategy strategy;
  SamplingPlan plan;
  TimingModel timing;
  std::filesystem::path dump_dir;  // empty -> no perturbation dump
};

struct AttributionRun {
  AttributionResult result;
  std::string reference_response;
  std::vector<PerturbationRecord> records;
  std::size_t vlm_queries = 0;
};

// Short stable hash of everything that determines phi.
inline std::string config_fingerprint(const MaskingStrategy& strategy,
                                      const SamplingPlan& plan,
                                      std::size_t n,
                                      std::string_view vlm_model,
                                      std::string_view embed_model) {
  const nlohmann::json doc = {
      {"masking", MaskingKindName(strategy.kind)},
      {"fill", strategy.fill.describe()},
      {"sampling", SamplingModeName(plan.mode)},
      {"budget", plan.mode == SamplingMode::kFirstOrderPlusMC
                     ? plan.budget_for(n)
                     : 0},
      {"seed", plan.mode == SamplingMode::kFirstOrderPlusMC ? plan.seed : 0},
      {"exact_threshold", plan.exact_threshold},
      {"vlm", vlm_model},
      {"embedder", embed_model},
  };
  return Sha256Hex(doc.dump()).substr(0, 16);
}

// sampler -> masking -> gateway -> estimator for one scene and prompt.
inline AttributionRun attribute(const Scene& scene, std::string_view prompt,
                                ModelGateway& gateway,
                                const AttributionConfig& config) {
  const auto wall_start = std::chrono::steady_clock::now();
  const std::size_t queries_before = gateway.counters().vlm_queries;
  const std::size_t n = scene.size();

  const std::vector<Coalition> plan = build_plan(n, config.plan);

  AttributionRun run;
  run.reference_response = gateway.query(scene.image, prompt);

  ModelGateway::ImageSink sink;
  if (!config.dump_dir.empty()) {
    std::filesystem::create_directories(config.dump_dir);
    const std::string stem = scene.id.empty() ? "scene" : scene.id;
    sink = [&config, stem](const Coalition& c, const Image& img) {
      WriteFileBytes(config.dump_dir / (stem + "_" + c.hex() + ".png"),
                     EncodePng(img));
    };
  }
  run.records = gateway.evaluate(scene, prompt, plan, config.strategy,
                                 run.reference_response, sink);

  ValueTable table(n);
  for (const auto& rec : run.records) table.set(rec.coalition, rec.value);
  run.result = estimate(table);

  run.vlm_queries = gateway.counters().vlm_queries - queries_before;
  if (config.timing.logical) {
    run.result.elapsed_s =
        static_cast<double>(run.vlm_queries) * config.timing.per_query_s;
  } else {
    run.result.elapsed_s = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - wall_start)
                               .count();
  }
  run.result.config_fingerprint =
      config_fingerprint(config.strategy, config.plan, n,
                         gateway.vlm().model_id(),
                         gateway.embedder().model_id());
  return run;
}

inline nlohmann::json result_to_json(const AttributionResult& result) {
  return {{"phi", result.phi},
          {"ranking", result.ranking},
          {"estimator", EstimatorName(result.estimator)},
          {"samples", result.samples_used},
          {"elapsed_s", result.elapsed_s},
          {"fingerprint", result.config_fingerprint}};
}

inline AttributionResult result_from_json(const nlohmann::json& doc) {
  AttributionResult result;
  try {
    result.phi = doc.at("phi").get<std::vector<double>>();
    result.ranking = doc.at("ranking").get<std::vector<std::size_t>>();
    result.estimator = doc.at("estimator").get<std::string>() == "exact"
                           ? EstimatorKind::kExact
                           : EstimatorKind::kMeanDiff;
    result.samples_used = doc.value("samples", std::size_t{0});
    result.elapsed_s = doc.value("elapsed_s", 0.0);
    result.config_fingerprint = doc.value("fingerprint", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError,
                std::string("bad attribution report: ") + e.what());
  }
  return result;
}

// Full report: the result fields plus labels, responses and every sample.
inline nlohmann::json report_json(const Scene& scene, std::string_view prompt,
                                  const AttributionRun& run,
                                  const AttributionConfig& config) {
  nlohmann::json doc = result_to_json(run.result);
  doc["scene"] = scene.id;
  doc["prompt"] = prompt;
  doc["masking"] = MaskingKindName(config.strategy.kind);
  doc["sampling"] = SamplingModeName(config.plan.mode);
  doc["labels"] = nlohmann::json::array();
  for (const auto& obj : scene.objects) doc["labels"].push_back(obj.label);
  doc["reference_response"] = run.reference_response;
  doc["perturbations"] = nlohmann::json::array();
  for (const auto& rec : run.records) {
    doc["perturbations"].push_back({{"coalition", rec.coalition.hex()},
                                    {"visible", rec.coalition.members()},
                                    {"image_sha256", rec.image_digest},
                                    {"response", rec.response},
                                    {"value", rec.value}});
  }
  return doc;
}

}  // namespace objshap
