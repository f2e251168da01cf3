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

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include "json.hpp"
#include "objshap/digest.hpp"
#include "objshap/error.hpp"
#include "objshap/gateway.hpp"
#include "objshap/image.hpp"

namespace objshap {

// Wire dialects. Vendor specifics live only in the request/response helpers
// below; everything else sees VlmClient / TextEmbedder.
enum class Adapter { kOpenAI, kGemini, kOllama };

inline std::optional<Adapter> ParseAdapter(std::string_view name) {
  if (name == "openai") return Adapter::kOpenAI;
  if (name == "gemini") return Adapter::kGemini;
  if (name == "ollama") return Adapter::kOllama;
  return std::nullopt;
}

inline std::string_view AdapterName(Adapter a) {
  switch (a) {
    case Adapter::kOpenAI: return "openai";
    case Adapter::kGemini: return "gemini";
    case Adapter::kOllama: return "ollama";
  }
  return "?";
}

inline std::string DefaultBaseUrl(Adapter a) {
  switch (a) {
    case Adapter::kOpenAI: return "https://api.openai.com/v1";
    case Adapter::kGemini:
      return "https://generativelanguage.googleapis.com/v1beta";
    case Adapter::kOllama: return "http://localhost:11434";
  }
  return {};
}

struct EndpointConfig {
  Adapter adapter = Adapter::kOpenAI;
  std::string base_url;   // empty -> adapter default
  std::string auth_env;   // env var holding the token; empty -> no auth
  std::string model;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::size_t max_concurrent = 4;
  double backoff_base_s = 0.5;
  double backoff_max_s = 8.0;

  void validate() const {
    if (!(timeout_s > 0.0)) {
      throw Error(ErrorCode::kConfigError, "timeout must be > 0");
    }
    if (max_concurrent < 1) {
      throw Error(ErrorCode::kConfigError, "max_concurrent must be >= 1");
    }
    if (max_retries < 0) {
      throw Error(ErrorCode::kConfigError, "max_retries must be >= 0");
    }
    if (model.empty()) {
      throw Error(ErrorCode::kConfigError, "model identifier is required");
    }
  }

  std::string effective_base_url() const {
    return base_url.empty() ? DefaultBaseUrl(adapter) : base_url;
  }

  // Token from the configured environment variable.
  std::string resolve_token() const {
    if (auth_env.empty()) return {};
    const char* value = std::getenv(auth_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw Error(ErrorCode::kConfigError,
                  "environment variable " + auth_env + " is not set");
    }
    return value;
  }
};

struct HttpRequest {
  std::string path;
  nlohmann::json body;
  httplib::Headers headers;
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

inline SplitUrl SplitBaseUrl(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "base URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.prefix = url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

inline void AddAuth(Adapter adapter, const std::string& token,
                    httplib::Headers& headers) {
  if (token.empty()) return;
  if (adapter == Adapter::kGemini) {
    headers.emplace("x-goog-api-key", token);
  } else {
    headers.emplace("Authorization", "Bearer " + token);
  }
}

}  // namespace detail

// Chat request carrying one user message with an image part and a text part.
// Decoding is pinned to temperature 0.
inline HttpRequest BuildVlmRequest(Adapter adapter, const std::string& model,
                                   const std::string& png_base64,
                                   std::string_view prompt,
                                   const std::string& token = {}) {
  HttpRequest req;
  switch (adapter) {
    case Adapter::kOpenAI:
      req.path = "/chat/completions";
      req.body = {
          {"model", model},
          {"temperature", 0},
          {"messages",
           {{{"role", "user"},
             {"content",
              {{{"type", "image_url"},
                {"image_url",
                 {{"url", "data:image/png;base64," + png_base64}}}},
               {{"type", "text"}, {"text", prompt}}}}}}}};
      break;
    case Adapter::kGemini:
      req.path = "/models/" + model + ":generateContent";
      req.body = {
          {"contents",
           {{{"role", "user"},
             {"parts",
              {{{"inline_data",
                 {{"mime_type", "image/png"}, {"data", png_base64}}}},
               {{"text", prompt}}}}}}},
          {"generationConfig", {{"temperature", 0}}}};
      break;
    case Adapter::kOllama:
      req.path = "/api/chat";
      req.body = {{"model", model},
                  {"stream", false},
                  {"options", {{"temperature", 0}}},
                  {"messages",
                   {{{"role", "user"},
                     {"content", prompt},
                     {"images", {png_base64}}}}}};
      break;
  }
  detail::AddAuth(adapter, token, req.headers);
  return req;
}

// Extracts the answer text; throws ModelRefusal when it is missing or filtered.
inline std::string ParseVlmResponse(Adapter adapter,
                                    const nlohmann::json& body) {
  std::string text;
  try {
    switch (adapter) {
      case Adapter::kOpenAI: {
        const auto& choice = body.at("choices").at(0);
        if (choice.value("finish_reason", std::string()) == "content_filter") {
          throw Error(ErrorCode::kModelRefusal, "response was filtered");
        }
        const auto& content = choice.at("message").at("content");
        if (content.is_string()) text = content.get<std::string>();
        break;
      }
      case Adapter::kGemini: {
        if (!body.contains("candidates") || body["candidates"].empty()) {
          throw Error(ErrorCode::kModelRefusal,
                      "no candidates: " + body.value("promptFeedback",
                                                     nlohmann::json{}).dump());
        }
        for (const auto& part :
             body["candidates"][0].at("content").at("parts")) {
          if (part.contains("text")) text += part["text"].get<std::string>();
        }
        break;
      }
      case Adapter::kOllama:
        text = body.at("message").at("content").get<std::string>();
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kModelRefusal,
                std::string("unexpected response shape: ") + e.what());
  }
  if (text.empty()) {
    throw Error(ErrorCode::kModelRefusal, "model returned no text");
  }
  return text;
}

inline HttpRequest BuildEmbedRequest(Adapter adapter, const std::string& model,
                                     std::string_view text,
                                     const std::string& token = {}) {
  HttpRequest req;
  switch (adapter) {
    case Adapter::kOpenAI:
      req.path = "/embeddings";
      req.body = {{"model", model}, {"input", text}};
      break;
    case Adapter::kGemini:
      req.path = "/models/" + model + ":embedContent";
      req.body = {{"content", {{"parts", {{{"text", text}}}}}}};
      break;
    case Adapter::kOllama:
      req.path = "/api/embed";
      req.body = {{"model", model}, {"input", text}};
      break;
  }
  detail::AddAuth(adapter, token, req.headers);
  return req;
}

inline Embedding ParseEmbedResponse(Adapter adapter,
                                    const nlohmann::json& body) {
  try {
    switch (adapter) {
      case Adapter::kOpenAI:
        return Embedding(
            body.at("data").at(0).at("embedding").get<std::vector<double>>());
      case Adapter::kGemini:
        return Embedding(
            body.at("embedding").at("values").get<std::vector<double>>());
      case Adapter::kOllama:
        return Embedding(
            body.at("embeddings").at(0).get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTransport,
                std::string("unexpected embedding response: ") + e.what());
  }
  throw Error(ErrorCode::kTransport, "unknown adapter");
}

// POSTs JSON with exponential backoff. Connection failures, 429 and 5xx are
// retried; 401/403 fail immediately.
class JsonPoster {
 public:
  explicit JsonPoster(const EndpointConfig& config)
      : config_(config), url_(detail::SplitBaseUrl(config.effective_base_url())) {}

  nlohmann::json post(const HttpRequest& request) const {
    const std::string body = request.body.dump();
    ErrorCode last_code = ErrorCode::kTransport;
    std::string last_message;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        const double delay =
            std::min(config_.backoff_max_s,
                     config_.backoff_base_s * std::pow(2.0, attempt - 1));
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      httplib::Client client(url_.origin);
      const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::duration<double>(config_.timeout_s));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto res = client.Post(url_.prefix + request.path, request.headers, body,
                             "application/json");
      if (!res) {
        last_code = ErrorCode::kTransport;
        last_message = "request to " + url_.origin + " failed: " +
                       httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw Error(ErrorCode::kAuthError,
                    "HTTP " + std::to_string(res->status) + " from " +
                        url_.origin + url_.prefix + request.path);
      }
      if (res->status == 429) {
        last_code = ErrorCode::kRateLimited;
        last_message = "HTTP 429 from " + url_.origin;
        continue;
      }
      if (res->status >= 500) {
        last_code = ErrorCode::kTransport;
        last_message = "HTTP " + std::to_string(res->status) + " from " +
                       url_.origin;
        continue;
      }
      if (res->status >= 400) {
        throw Error(ErrorCode::kTransport,
                    "HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kTransport,
                    std::string("response is not JSON: ") + e.what());
      }
    }
    throw Error(last_code, last_message + " (after " +
                               std::to_string(config_.max_retries) +
                               " retries)");
  }

 private:
  EndpointConfig config_;
  detail::SplitUrl url_;
};

class HttpVlmClient : public VlmClient {
 public:
  explicit HttpVlmClient(EndpointConfig config)
      : config_((config.validate(), std::move(config))),
        token_(config_.resolve_token()),
        poster_(config_) {}

  std::string model_id() const override { return config_.model; }

  std::string query(const Image& image, std::string_view prompt) override {
    const auto png = EncodePng(image);
    const HttpRequest req = BuildVlmRequest(config_.adapter, config_.model,
                                            Base64Encode(png), prompt, token_);
    return ParseVlmResponse(config_.adapter, poster_.post(req));
  }

 private:
  EndpointConfig config_;
  std::string token_;
  JsonPoster poster_;
};

class HttpEmbedder : public TextEmbedder {
 public:
  explicit HttpEmbedder(EndpointConfig config)
      : config_((config.validate(), std::move(config))),
        token_(config_.resolve_token()),
        poster_(config_) {}

  std::string model_id() const override { return config_.model; }

  Embedding embed(std::string_view text) override {
    const HttpRequest req =
        BuildEmbedRequest(config_.adapter, config_.model, text, token_);
    return ParseEmbedResponse(config_.adapter, poster_.post(req));
  }

 private:
  EndpointConfig config_;
  std::string token_;
  JsonPoster poster_;
};

}  // namespace objshap
