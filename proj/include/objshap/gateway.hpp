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
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "objshap/digest.hpp"
#include "objshap/error.hpp"
#include "objshap/image.hpp"
#include "objshap/masking.hpp"
#include "objshap/scene.hpp"

namespace objshap {

// Text embedding: finite, non-empty, not all zeros.
class Embedding {
 public:
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
      throw Error(ErrorCode::kPrecondition, "embedding has no components");
    }
    bool nonzero = false;
    for (double v : values_) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kPrecondition, "embedding is not finite");
      }
      nonzero = nonzero || v != 0.0;
    }
    if (!nonzero) {
      throw Error(ErrorCode::kZeroVector, "embedding is the zero vector");
    }
  }

  std::size_t dim() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

  // Copy extended with zeros up to `dim` components.
  Embedding padded(std::size_t dim) const {
    std::vector<double> v = values_;
    if (v.size() < dim) v.resize(dim, 0.0);
    return Embedding(std::move(v));
  }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dims " + std::to_string(a.dim()) + " and " +
                    std::to_string(b.dim()) + " differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values()[i] * b.values()[i];
    na += a.values()[i] * a.values()[i];
    nb += b.values()[i] * b.values()[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// f_VLM: one image plus one prompt in, free text out.
class VlmClient {
 public:
  virtual ~VlmClient() = default;
  virtual std::string model_id() const = 0;
  virtual std::string query(const Image& image, std::string_view prompt) = 0;
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::string model_id() const = 0;
  virtual Embedding embed(std::string_view text) = 0;
  // True when vectors may grow over a run and must be zero-padded to compare.
  virtual bool variable_dimension() const { return false; }
};

// On-disk cache at {root}/{model_id}/{sha256}.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  static std::string SanitizeModelId(std::string_view model_id) {
    std::string out(model_id);
    for (char& c : out) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '_' ||
                      c == '.';
      if (!ok) c = '_';
    }
    return out.empty() ? "_" : out;
  }

  std::filesystem::path path_for(std::string_view model_id,
                                 std::string_view key) const {
    return root_ / SanitizeModelId(model_id) / (std::string(key) + ".json");
  }

  std::optional<nlohmann::json> load(std::string_view model_id,
                                     std::string_view key) const {
    const auto path = path_for(model_id, key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      const auto bytes = ReadFileBytes(path);
      return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const std::exception&) {
      return std::nullopt;  // unreadable entries are treated as misses
    }
  }

  void store(std::string_view model_id, std::string_view key,
             const nlohmann::json& entry) const {
    const auto path = path_for(model_id, key);
    std::filesystem::create_directories(path.parent_path());
    // Write-then-rename so a concurrent reader never sees a partial file.
    auto tmp = path;
    tmp += ".tmp" + std::to_string(
                        std::hash<std::thread::id>{}(std::this_thread::get_id()));
    WriteFileText(tmp, entry.dump());
    std::filesystem::rename(tmp, path);
  }

 private:
  std::filesystem::path root_;
};

// One valued coalition.
struct PerturbationRecord {
  Coalition coalition;
  std::string image_digest;
  std::string response;
  double value = 0.0;
};

struct GatewayOptions {
  std::size_t max_concurrent = 4;
  std::shared_ptr<ResponseCache> cache;  // null disables the disk cache
};

struct GatewayCounters {
  std::size_t vlm_queries = 0;     // query() calls, cached or not
  std::size_t vlm_backend_calls = 0;
  std::size_t embed_backend_calls = 0;
  std::size_t cache_hits = 0;
};

// Caches, value function v(S') and bounded fan-out over a VLM + embedder pair.
class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<VlmClient> vlm,
               std::shared_ptr<TextEmbedder> embedder,
               GatewayOptions options = {})
      : vlm_(std::move(vlm)),
        embedder_(std::move(embedder)),
        options_(std::move(options)) {
    if (!vlm_ || !embedder_) {
      throw Error(ErrorCode::kConfigError, "gateway needs a VLM and embedder");
    }
    if (options_.max_concurrent == 0) {
      throw Error(ErrorCode::kConfigError, "max_concurrent must be >= 1");
    }
  }

  const VlmClient& vlm() const { return *vlm_; }
  const TextEmbedder& embedder() const { return *embedder_; }
  std::size_t max_concurrent() const { return options_.max_concurrent; }

  GatewayCounters counters() const {
    return {vlm_queries_.load(), vlm_backend_calls_.load(),
            embed_backend_calls_.load(), cache_hits_.load()};
  }

  static std::string QueryKey(std::string_view model_id,
                              std::string_view image_digest,
                              std::string_view prompt) {
    std::string material = "vlm";
    material.push_back('\0');
    material.append(model_id);
    material.push_back('\0');
    material.append(image_digest);
    material.push_back('\0');
    material.append(prompt);
    return Sha256Hex(material);
  }

  std::string query(const Image& image, std::string_view prompt) {
    if (image.empty()) {
      throw Error(ErrorCode::kPrecondition, "query image is empty");
    }
    if (prompt.empty()) {
      throw Error(ErrorCode::kPrecondition, "query prompt is empty");
    }
    ++vlm_queries_;
    const std::string model = vlm_->model_id();
    const std::string digest = image.digest();
    const std::string key = QueryKey(model, digest, prompt);

    const auto lock = key_lock(key);
    std::scoped_lock guard(*lock);
    if (auto hit = memo_get(responses_, key)) {
      ++cache_hits_;
      return *hit;
    }
    if (options_.cache) {
      if (auto entry = options_.cache->load(model, key);
          entry && entry->contains("response") &&
          (*entry)["response"].is_string()) {
        ++cache_hits_;
        std::string text = (*entry)["response"].get<std::string>();
        memo_put(responses_, key, text);
        return text;
      }
    }
    ++vlm_backend_calls_;
    std::string text = vlm_->query(image, prompt);
    if (text.empty()) {
      throw Error(ErrorCode::kModelRefusal, "model returned an empty response");
    }
    if (options_.cache) {
      options_.cache->store(model, key,
                            {{"kind", "vlm"},
                             {"model", model},
                             {"image_digest", digest},
                             {"prompt", prompt},
                             {"response", text}});
    }
    memo_put(responses_, key, text);
    return text;
  }

  Embedding embed(std::string_view text) {
    if (text.empty()) {
      throw Error(ErrorCode::kPrecondition, "cannot embed empty text");
    }
    const std::string model = embedder_->model_id();
    std::string material = "embed";
    material.push_back('\0');
    material.append(model);
    material.push_back('\0');
    material.append(text);
    const std::string key = Sha256Hex(material);

    const auto lock = key_lock(key);
    std::scoped_lock guard(*lock);
    {
      std::scoped_lock memo_guard(memo_mutex_);
      if (auto it = embeddings_.find(key); it != embeddings_.end()) {
        return it->second;
      }
    }
    // Variable-dimension (vocabulary) embedders are run-local; never persist.
    const bool persist = options_.cache && !embedder_->variable_dimension();
    if (persist) {
      if (auto entry = options_.cache->load(model, key);
          entry && entry->contains("embedding")) {
        Embedding e((*entry)["embedding"].get<std::vector<double>>());
        std::scoped_lock memo_guard(memo_mutex_);
        embeddings_.emplace(key, e);
        return e;
      }
    }
    ++embed_backend_calls_;
    Embedding e = embedder_->embed(text);
    if (persist) {
      options_.cache->store(model, key,
                            {{"kind", "embedding"},
                             {"model", model},
                             {"embedding", e.values()}});
    }
    std::scoped_lock memo_guard(memo_mutex_);
    embeddings_.emplace(key, e);
    return e;
  }

  // v = cos(E(reference), E(perturbed)); exactly 1 for identical text.
  double value_of(std::string_view reference, std::string_view perturbed) {
    if (reference.empty() || perturbed.empty()) {
      throw Error(ErrorCode::kPrecondition, "value_of needs non-empty texts");
    }
    if (reference == perturbed) return 1.0;
    Embedding a = embed(reference);
    Embedding b = embed(perturbed);
    if (embedder_->variable_dimension() && a.dim() != b.dim()) {
      const std::size_t dim = std::max(a.dim(), b.dim());
      a = a.padded(dim);
      b = b.padded(dim);
    }
    return cosine_similarity(a, b);
  }

  using ImageSink = std::function<void(const Coalition&, const Image&)>;

  // Values every coalition with at most max_concurrent requests in flight.
  // Records come back in input order; any failure fails the whole batch.
  std::vector<PerturbationRecord> evaluate(
      const Scene& scene, std::string_view prompt,
      const std::vector<Coalition>& coalitions,
      const MaskingStrategy& strategy, const std::string& reference_response,
      const ImageSink& sink = {}) {
    std::vector<PerturbationRecord> records(coalitions.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= coalitions.size()) return;
        try {
          const Coalition& c = coalitions[i];
          const Image perturbed = apply_masking(scene, c, strategy);
          if (sink) sink(c, perturbed);
          PerturbationRecord& rec = records[i];
          rec.coalition = c;
          rec.image_digest = perturbed.digest();
          if (c.is_full()) {
            rec.response = reference_response;
            rec.value = 1.0;
          } else {
            rec.response = query(perturbed, prompt);
            rec.value = value_of(reference_response, rec.response);
          }
        } catch (...) {
          std::scoped_lock guard(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed = true;
        }
      }
    };

    const std::size_t threads =
        std::min(options_.max_concurrent, coalitions.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(threads);
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);
    return records;
  }

 private:
  std::shared_ptr<std::mutex> key_lock(const std::string& key) {
    std::scoped_lock guard(locks_mutex_);
    auto& slot = key_locks_[key];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
  }

  std::optional<std::string> memo_get(
      const std::unordered_map<std::string, std::string>& memo,
      const std::string& key) {
    std::scoped_lock guard(memo_mutex_);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    return std::nullopt;
  }
  void memo_put(std::unordered_map<std::string, std::string>& memo,
                const std::string& key, const std::string& value) {
    std::scoped_lock guard(memo_mutex_);
    memo.emplace(key, value);
  }

  std::shared_ptr<VlmClient> vlm_;
  std::shared_ptr<TextEmbedder> embedder_;
  GatewayOptions options_;

  std::mutex locks_mutex_;
  std::unordered_map<std::string, std::shared_ptr<std::mutex>> key_locks_;
  std::mutex memo_mutex_;
  std::unordered_map<std::string, std::string> responses_;
  std::unordered_map<std::string, Embedding> embeddings_;

  std::atomic<std::size_t> vlm_queries_{0};
  std::atomic<std::size_t> vlm_backend_calls_{0};
  std::atomic<std::size_t> embed_backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace objshap
