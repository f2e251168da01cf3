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
#include <cctype>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "objshap/error.hpp"
#include "objshap/gateway.hpp"
#include "objshap/scene.hpp"

// Deterministic offline stand-ins for the VLM and the embedding model.

namespace objshap {

// Lowercased whitespace tokens with punctuation removed; empty tokens dropped.
inline std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!std::ispunct(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

struct MockObject {
  std::size_t id = 0;
  std::string label;
  std::size_t area = 0;
};

// "a scene containing <labels>" with labels ordered by area (desc) then id;
// "an empty scene" when nothing is visible.
inline std::string mock_vlm(std::vector<MockObject> visible) {
  if (visible.empty()) return "an empty scene";
  std::stable_sort(visible.begin(), visible.end(),
                   [](const MockObject& a, const MockObject& b) {
                     if (a.area != b.area) return a.area > b.area;
                     return a.id < b.id;
                   });
  std::string out = "a scene containing ";
  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (i > 0) out += ", ";
    out += visible[i].label;
  }
  return out;
}

// Ids of objects with fewer than half of their mask pixels changed relative
// to the scene's original image.
inline std::vector<std::size_t> mock_visible_objects(const Scene& scene,
                                                     const Image& image) {
  if (image.width() != scene.image.width() ||
      image.height() != scene.image.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mock VLM got an image of a different size than its scene");
  }
  std::vector<std::size_t> visible;
  for (const auto& obj : scene.objects) {
    std::size_t replaced = 0;
    for (std::size_t i = 0; i < obj.mask.size(); ++i) {
      if (obj.mask.get(i) && image.at(i) != scene.image.at(i)) ++replaced;
    }
    if (2 * replaced < obj.area) visible.push_back(obj.id);
  }
  return visible;
}

struct MockVlmOptions {
  // Restrict the answer to objects the prompt names, when it names any.
  bool focus_on_prompt = false;
};

class MockVlm : public VlmClient {
 public:
  explicit MockVlm(Scene scene, MockVlmOptions options = {})
      : scene_(std::move(scene)), options_(options) {}

  std::string model_id() const override {
    return options_.focus_on_prompt ? "mock-vlm-focus" : "mock-vlm";
  }

  std::string query(const Image& image, std::string_view prompt) override {
    const auto visible = mock_visible_objects(scene_, image);
    std::vector<std::size_t> named;
    if (options_.focus_on_prompt) named = named_objects(prompt);
    std::vector<MockObject> listed;
    for (std::size_t id : visible) {
      if (!named.empty() &&
          std::find(named.begin(), named.end(), id) == named.end()) {
        continue;
      }
      const auto& obj = scene_.objects[id];
      listed.push_back({obj.id, obj.label, obj.area});
    }
    return mock_vlm(std::move(listed));
  }

  const Scene& scene() const { return scene_; }

 private:
  // Objects whose every label token occurs in the prompt.
  std::vector<std::size_t> named_objects(std::string_view prompt) const {
    const auto words = Tokenize(prompt);
    const std::set<std::string> vocab(words.begin(), words.end());
    std::vector<std::size_t> named;
    for (const auto& obj : scene_.objects) {
      const auto label_tokens = Tokenize(obj.label);
      if (label_tokens.empty()) continue;
      const bool all = std::all_of(
          label_tokens.begin(), label_tokens.end(),
          [&](const std::string& t) { return vocab.contains(t); });
      if (all) named.push_back(obj.id);
    }
    return named;
  }

  Scene scene_;
  MockVlmOptions options_;
};

// Bag-of-words counts over the vocabulary seen so far in this run. Token
// indices are assigned by first occurrence; vectors are zero-padded when
// compared.
class MockEmbedder : public TextEmbedder {
 public:
  std::string model_id() const override { return "mock-bow"; }
  bool variable_dimension() const override { return true; }

  Embedding embed(std::string_view text) override {
    const auto tokens = Tokenize(text);
    std::scoped_lock guard(mutex_);
    std::vector<double> counts(vocabulary_.size(), 0.0);
    for (const auto& t : tokens) {
      auto [it, inserted] = vocabulary_.emplace(t, vocabulary_.size());
      if (inserted) counts.push_back(0.0);
      counts[it->second] += 1.0;
    }
    if (counts.empty()) {
      throw Error(ErrorCode::kZeroVector,
                  "text has no tokens: \"" + std::string(text) + "\"");
    }
    return Embedding(std::move(counts));
  }

  std::size_t vocabulary_size() const {
    std::scoped_lock guard(mutex_);
    return vocabulary_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::size_t> vocabulary_;
};

}  // namespace objshap
