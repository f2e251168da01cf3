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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "objshap/attribution.hpp"
#include "objshap/error.hpp"
#include "objshap/evaluation.hpp"
#include "objshap/gateway.hpp"
#include "objshap/http.hpp"
#include "objshap/mock.hpp"
#include "objshap/overlay.hpp"
#include "objshap/scene.hpp"

namespace objshap::cli {

// Documented process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitGateway = 3;
inline constexpr int kExitSchema = 4;

inline int ExitCodeFor(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kConfigError:
    case ErrorCode::kTooManyObjects:
    case ErrorCode::kIoError:
      return kExitConfig;
    case ErrorCode::kTransport:
    case ErrorCode::kAuthError:
    case ErrorCode::kModelRefusal:
    case ErrorCode::kRateLimited:
      return kExitGateway;
    case ErrorCode::kSchemaError:
    case ErrorCode::kMalformedEncoding:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kEmptyObjectList:
    case ErrorCode::kMismatchedResult:
      return kExitSchema;
    default:
      return kExitFailure;
  }
}

struct GatewayFlags {
  bool mock = false;
  bool mock_focus = false;
  double mock_latency_s = 0.0;
  std::string vlm_adapter = "openai";
  std::string vlm_url;
  std::string vlm_model = "gpt-4o";
  std::optional<std::string> vlm_auth_env;
  std::string embed_adapter = "openai";
  std::string embed_url;
  std::string embed_model = "text-embedding-3-small";
  std::optional<std::string> embed_auth_env;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::size_t max_concurrent = 4;
  double backoff_s = 0.5;
  std::string cache_dir = ".objshap_cache";
  bool no_cache = false;

  void add_to(CLI::App& app) {
    app.add_flag("--mock", mock, "Use the offline mock VLM and embedder");
    app.add_flag("--mock-focus", mock_focus,
                 "Mock VLM answers only about objects the prompt names");
    app.add_option("--mock-latency", mock_latency_s,
                   "Simulated seconds per VLM query reported in --mock runs");
    app.add_option("--vlm-adapter", vlm_adapter, "openai | gemini | ollama");
    app.add_option("--vlm-url", vlm_url, "VLM base URL");
    app.add_option("--vlm-model", vlm_model, "VLM model identifier");
    app.add_option("--vlm-auth-env", vlm_auth_env,
                   "Env var holding the VLM token (empty for none)");
    app.add_option("--embed-adapter", embed_adapter,
                   "openai | gemini | ollama | mock");
    app.add_option("--embed-url", embed_url, "Embedding base URL");
    app.add_option("--embed-model", embed_model, "Embedding model identifier");
    app.add_option("--embed-auth-env", embed_auth_env,
                   "Env var holding the embedding token (empty for none)");
    app.add_option("--timeout", timeout_s, "Request timeout in seconds");
    app.add_option("--max-retries", max_retries, "Retries on transient errors");
    app.add_option("--max-concurrent", max_concurrent,
                   "Maximum in-flight model requests");
    app.add_option("--backoff", backoff_s, "Initial retry backoff in seconds");
    app.add_option("--cache-dir", cache_dir, "Response cache directory");
    app.add_flag("--no-cache", no_cache, "Disable the on-disk response cache");
  }

  static std::string DefaultAuthEnv(Adapter adapter) {
    switch (adapter) {
      case Adapter::kOpenAI: return "OPENAI_API_KEY";
      case Adapter::kGemini: return "GEMINI_API_KEY";
      case Adapter::kOllama: return "";
    }
    return "";
  }

  EndpointConfig endpoint(const std::string& adapter_name,
                          const std::string& url, const std::string& model,
                          const std::optional<std::string>& auth_env) const {
    const auto adapter = ParseAdapter(adapter_name);
    if (!adapter) {
      throw Error(ErrorCode::kConfigError,
                  "unknown adapter \"" + adapter_name + "\"");
    }
    EndpointConfig cfg;
    cfg.adapter = *adapter;
    cfg.base_url = url;
    cfg.model = model;
    cfg.auth_env = auth_env.value_or(DefaultAuthEnv(*adapter));
    cfg.timeout_s = timeout_s;
    cfg.max_retries = max_retries;
    cfg.max_concurrent = max_concurrent;
    cfg.backoff_base_s = backoff_s;
    cfg.validate();
    return cfg;
  }

  TimingModel timing() const { return {mock, mock_latency_s}; }

  // Resolves every endpoint up front so config errors surface before work.
  GatewayFactory factory() const {
    if (max_concurrent < 1) {
      throw Error(ErrorCode::kConfigError, "max_concurrent must be >= 1");
    }
    GatewayOptions options;
    options.max_concurrent = max_concurrent;
    if (mock) {
      auto embedder = std::make_shared<MockEmbedder>();
      const MockVlmOptions vlm_options{mock_focus};
      return [embedder, vlm_options, options](const Scene& scene) {
        return std::make_unique<ModelGateway>(
            std::make_shared<MockVlm>(scene, vlm_options), embedder, options);
      };
    }
    if (!no_cache) options.cache = std::make_shared<ResponseCache>(cache_dir);
    std::shared_ptr<VlmClient> vlm = std::make_shared<HttpVlmClient>(
        endpoint(vlm_adapter, vlm_url, vlm_model, vlm_auth_env));
    std::shared_ptr<TextEmbedder> embedder;
    if (embed_adapter == "mock") {
      embedder = std::make_shared<MockEmbedder>();
    } else {
      embedder = std::make_shared<HttpEmbedder>(
          endpoint(embed_adapter, embed_url, embed_model, embed_auth_env));
    }
    return [vlm, embedder, options](const Scene&) {
      return std::make_unique<ModelGateway>(vlm, embedder, options);
    };
  }
};

struct MethodFlags {
  std::string sampling = "mc";
  std::optional<std::size_t> mc_budget;
  std::uint64_t seed = 0;
  std::size_t exact_threshold = kDefaultExactThreshold;
  std::string fill = "128,128,128";

  void add_to(CLI::App& app) {
    app.add_option("--sampling", sampling, "exact | first-order | mc");
    app.add_option("--mc-budget", mc_budget,
                   "Extra Monte Carlo coalitions (default 2N)");
    app.add_option("--seed", seed, "Sampling seed");
    app.add_option("--exact-threshold", exact_threshold,
                   "Largest object count allowed in exact mode");
    app.add_option("--fill", fill, "Occlusion fill: r,g,b or mean");
  }

  SamplingPlan plan() const {
    const auto mode = ParseSamplingMode(sampling);
    if (!mode) {
      throw Error(ErrorCode::kConfigError,
                  "unknown sampling mode \"" + sampling + "\"");
    }
    SamplingPlan p;
    p.mode = *mode;
    p.budget = mc_budget;
    p.seed = seed;
    p.exact_threshold = exact_threshold;
    return p;
  }

  FillSpec fill_spec() const {
    if (fill == "mean") return FillSpec::Mean();
    int r = 0, g = 0, b = 0;
    char tail = 0;
    if (std::sscanf(fill.c_str(), "%d,%d,%d%c", &r, &g, &b, &tail) != 3 ||
        r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
      throw Error(ErrorCode::kConfigError,
                  "fill must be r,g,b in [0,255] or mean, got \"" + fill +
                      "\"");
    }
    return FillSpec::Solid({static_cast<std::uint8_t>(r),
                            static_cast<std::uint8_t>(g),
                            static_cast<std::uint8_t>(b)});
  }
};

inline MaskingKind ParseMaskingOrThrow(const std::string& name) {
  const auto kind = ParseMaskingKind(name);
  if (!kind) {
    throw Error(ErrorCode::kConfigError,
                "unknown masking strategy \"" + name + "\"");
  }
  return *kind;
}

struct OverlayFlags {
  OverlaySpec spec;
  bool no_annotate = false;

  void add_to(CLI::App& app) {
    app.add_option("--colormap", spec.colormap,
                   "viridis | inferno | hot | gray");
    app.add_option("--alpha", spec.alpha, "Tint opacity in [0, 1]");
    app.add_flag("--no-annotate", no_annotate, "Skip label and value text");
  }

  OverlaySpec resolved() const {
    OverlaySpec s = spec;
    s.annotate = !no_annotate;
    return s;
  }
};

inline void WriteJson(const std::filesystem::path& path,
                      const nlohmann::json& doc) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  WriteFileText(path, doc.dump(2) + "\n");
}

// Runs the command line; returns the process exit code.
inline int Run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Object-level Shapley attribution for vision-language models",
               "objshap"};
  app.set_config("--config", "", "TOML/INI config file; flags override it");
  app.require_subcommand(1);

  // attribute
  auto* attribute_cmd =
      app.add_subcommand("attribute", "Attribute a model response to objects");
  std::string scene_path;
  std::optional<std::string> prompt_override;
  std::string masking = "bboa";
  std::string out_dir = ".";
  std::string report_path;
  std::string overlay_path;
  std::string dump_dir;
  GatewayFlags gateway_flags;
  MethodFlags method_flags;
  OverlayFlags overlay_flags;
  attribute_cmd->add_option("--scene", scene_path, "Scene JSON")->required();
  attribute_cmd->add_option("--prompt", prompt_override,
                            "Override the scene prompt");
  attribute_cmd->add_option("--masking", masking, "precise | bbox | bboa");
  attribute_cmd->add_option("--out", out_dir, "Output directory");
  attribute_cmd->add_option("--report", report_path, "Report JSON path");
  attribute_cmd->add_option("--overlay", overlay_path, "Overlay PNG path");
  attribute_cmd->add_option("--dump-perturbations", dump_dir,
                            "Write every perturbed image here");
  gateway_flags.add_to(*attribute_cmd);
  method_flags.add_to(*attribute_cmd);
  overlay_flags.add_to(*attribute_cmd);

  // evaluate
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Run the benchmark protocol on a dataset");
  std::string dataset_path;
  std::vector<std::string> methods;
  std::vector<std::string> maskings;
  std::string eval_out = "eval_out";
  bool skip_failures = false;
  GatewayFlags eval_gateway;
  MethodFlags eval_method;
  evaluate_cmd->add_option("--dataset", dataset_path, "Dataset JSONL")
      ->required();
  evaluate_cmd->add_option(
      "--method", methods,
      "pixelshap | baseline-largest | baseline-central (repeatable)");
  evaluate_cmd->add_option("--masking", maskings,
                           "precise | bbox | bboa (repeatable)");
  evaluate_cmd->add_option("--out", eval_out, "Output directory");
  evaluate_cmd->add_flag("--skip-failures", skip_failures,
                         "Record failing entries and continue");
  eval_gateway.add_to(*evaluate_cmd);
  eval_method.add_to(*evaluate_cmd);

  // render
  auto* render_cmd =
      app.add_subcommand("render", "Render an overlay from a saved report");
  std::string render_scene;
  std::string render_report;
  std::string render_out = "overlay.png";
  OverlayFlags render_overlay_flags;
  render_cmd->add_option("--scene", render_scene, "Scene JSON")->required();
  render_cmd->add_option("--report", render_report, "Report JSON")->required();
  render_cmd->add_option("--out", render_out, "Output PNG");
  render_overlay_flags.add_to(*render_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (attribute_cmd->parsed()) {
      const Scene scene = load_scene_file(scene_path);
      for (const auto& w : scene.warnings) err << "warning: " << w << "\n";
      const std::string prompt = prompt_override.value_or(scene.prompt);
      if (prompt.empty()) {
        throw Error(ErrorCode::kConfigError,
                    "no prompt: the scene has none and --prompt is not set");
      }
      AttributionConfig config;
      config.strategy = {ParseMaskingOrThrow(masking),
                         method_flags.fill_spec()};
      config.plan = method_flags.plan();
      config.timing = gateway_flags.timing();
      config.dump_dir = dump_dir;
      const OverlaySpec overlay_spec = overlay_flags.resolved();
      if (!ColorRamp::Named(overlay_spec.colormap)) {
        throw Error(ErrorCode::kConfigError,
                    "unknown colormap \"" + overlay_spec.colormap + "\"");
      }

      auto gateway = gateway_flags.factory()(scene);
      const AttributionRun run = attribute(scene, prompt, *gateway, config);

      const std::filesystem::path report =
          report_path.empty()
              ? std::filesystem::path(out_dir) / (scene.id + ".report.json")
              : std::filesystem::path(report_path);
      const std::filesystem::path overlay =
          overlay_path.empty()
              ? std::filesystem::path(out_dir) / (scene.id + ".overlay.png")
              : std::filesystem::path(overlay_path);
      WriteJson(report, report_json(scene, prompt, run, config));
      if (overlay.has_parent_path()) {
        std::filesystem::create_directories(overlay.parent_path());
      }
      WriteFileBytes(overlay,
                     render_overlay(scene, run.result, overlay_spec));

      out << "response: " << run.reference_response << "\n";
      out << "estimator: " << EstimatorName(run.result.estimator)
          << ", samples: " << run.result.samples_used << "\n";
      for (std::size_t rank = 0; rank < run.result.ranking.size(); ++rank) {
        const std::size_t id = run.result.ranking[rank];
        char line[256];
        std::snprintf(line, sizeof(line), "%3zu. [%zu] %-20s %+.6f\n",
                      rank + 1, id, scene.objects[id].label.c_str(),
                      run.result.phi[id]);
        out << line;
      }
      out << "report: " << report.string() << "\noverlay: "
          << overlay.string() << "\n";
      return kExitOk;
    }

    if (evaluate_cmd->parsed()) {
      if (methods.empty()) methods.push_back("pixelshap");
      if (maskings.empty()) maskings.push_back("bboa");
      std::vector<MethodKind> method_kinds;
      for (const auto& m : methods) {
        const auto kind = ParseMethod(m);
        if (!kind) {
          throw Error(ErrorCode::kConfigError, "unknown method \"" + m + "\"");
        }
        method_kinds.push_back(*kind);
      }
      std::vector<MaskingKind> masking_kinds;
      for (const auto& m : maskings) {
        masking_kinds.push_back(ParseMaskingOrThrow(m));
      }
      const SamplingPlan plan = eval_method.plan();
      const FillSpec fill = eval_method.fill_spec();
      const GatewayFactory factory = eval_gateway.factory();
      const auto dataset = load_dataset(dataset_path);

      std::vector<MetricsRow> rows;
      nlohmann::json summary = {{"dataset", dataset_path},
                                {"entries", dataset.size()},
                                {"rows", nlohmann::json::array()}};
      std::filesystem::create_directories(eval_out);
      std::ofstream trace_file(std::filesystem::path(eval_out) / "trace.jsonl",
                               std::ios::trunc);

      auto run_one = [&](MethodKind kind, MaskingKind mask_kind) {
        MethodConfig method;
        method.kind = kind;
        method.attribution.strategy = {mask_kind, fill};
        method.attribution.plan = plan;
        method.attribution.timing = eval_gateway.timing();
        EvaluationOptions options;
        options.skip_failures = skip_failures;
        const EvaluationOutput result =
            run_evaluation(dataset, method, factory, options);
        for (auto trace : result.trace) {
          trace["method"] = MethodName(kind);
          trace["masking"] = result.row.masking;
          trace_file << trace.dump() << "\n";
        }
        nlohmann::json row = metrics_to_json(result.row);
        row["method"] = MethodName(kind);
        summary["rows"].push_back(std::move(row));
        rows.push_back(result.row);
      };

      for (MethodKind kind : method_kinds) {
        if (kind == MethodKind::kPixelShap) {
          for (MaskingKind mk : masking_kinds) run_one(kind, mk);
        } else {
          run_one(kind, masking_kinds.front());
        }
      }
      const std::string table = format_metrics_table(rows);
      summary["table"] = table;
      WriteJson(std::filesystem::path(eval_out) / "summary.json", summary);
      WriteFileText(std::filesystem::path(eval_out) / "summary.txt", table);
      out << table;
      return kExitOk;
    }

    if (render_cmd->parsed()) {
      const Scene scene = load_scene_file(render_scene);
      nlohmann::json doc;
      try {
        const auto bytes = ReadFileBytes(render_report);
        doc = nlohmann::json::parse(bytes.begin(), bytes.end());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kSchemaError,
                    render_report + ": " + e.what());
      }
      const AttributionResult result = result_from_json(doc);
      const std::filesystem::path target = render_out;
      if (target.has_parent_path()) {
        std::filesystem::create_directories(target.parent_path());
      }
      WriteFileBytes(target, render_overlay(scene, result,
                                            render_overlay_flags.resolved()));
      out << "overlay: " << target.string() << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace objshap::cli
