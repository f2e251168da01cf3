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
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "objshap/image.hpp"
#include "objshap/scene.hpp"

// Procedural scenes for demos and fixtures: flat-coloured rectangles and
// ellipses on a plain background.

namespace objshap::synthetic {

inline BitMask RectMask(int width, int height, const Box& box) {
  BitMask mask(width, height);
  for (int y = std::max(0, box.y_min); y < std::min(height, box.y_max); ++y) {
    for (int x = std::max(0, box.x_min); x < std::min(width, box.x_max); ++x) {
      mask.set(x, y, true);
    }
  }
  return mask;
}

inline BitMask EllipseMask(int width, int height, double cx, double cy,
                           double rx, double ry) {
  BitMask mask(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) mask.set(x, y, true);
    }
  }
  return mask;
}

// Label pool with repeats and multi-word labels so bag-of-words games are
// not symmetric.
inline const std::vector<std::string>& DefaultLabels() {
  static const std::vector<std::string> labels = {
      "person", "dog",        "car",       "red car", "traffic light",
      "bicycle", "cat",       "stop sign", "person",  "tree",
      "bus",    "small dog",  "bench",     "truck",   "umbrella"};
  return labels;
}

inline Rgb RandomColor(std::mt19937_64& rng) {
  Rgb c;
  do {
    c = {static_cast<std::uint8_t>(rng() % 256),
         static_cast<std::uint8_t>(rng() % 256),
         static_cast<std::uint8_t>(rng() % 256)};
  } while (c == Rgb{128, 128, 128} || c == Rgb{40, 40, 40});
  return c;
}

struct RandomSceneOptions {
  int width = 64;
  int height = 48;
  std::size_t objects = 5;
  std::vector<std::string> labels = DefaultLabels();
  std::string prompt = "Describe the scene.";
  bool amodal = false;
};

// Objects are painted in id order, so later objects occlude earlier ones. By
// default each mask holds only the pixels that show its object, like instance
// segmentation output; with `amodal` masks keep the full shape and overlap.
inline Scene RandomScene(std::uint64_t seed,
                         const RandomSceneOptions& options = {}) {
  std::mt19937_64 rng(seed);
  const int w = options.width;
  const int h = options.height;
  auto random_shape = [&] {
    BitMask mask;
    do {
      if (rng() % 2 == 0) {
        const int bw = 4 + static_cast<int>(rng() % (w / 2));
        const int bh = 4 + static_cast<int>(rng() % (h / 2));
        const int x0 = static_cast<int>(rng() % (w - bw));
        const int y0 = static_cast<int>(rng() % (h - bh));
        mask = RectMask(w, h, {x0, y0, x0 + bw, y0 + bh});
      } else {
        const double rx = 3.0 + static_cast<double>(rng() % (w / 4));
        const double ry = 3.0 + static_cast<double>(rng() % (h / 4));
        const double cx = rx + static_cast<double>(rng() % (w - 2 * static_cast<int>(rx)));
        const double cy = ry + static_cast<double>(rng() % (h - 2 * static_cast<int>(ry)));
        mask = EllipseMask(w, h, cx, cy, rx, ry);
      }
    } while (!mask.any());
    return mask;
  };

  std::vector<BitMask> shapes;
  std::vector<BitMask> masks;
  // Redraw until every object keeps a few visible pixels.
  for (;;) {
    shapes.clear();
    for (std::size_t i = 0; i < options.objects; ++i) {
      shapes.push_back(random_shape());
    }
    masks = shapes;
    if (options.amodal) break;
    for (std::size_t i = 0; i < masks.size(); ++i) {
      for (std::size_t j = i + 1; j < shapes.size(); ++j) {
        for (std::size_t p = 0; p < masks[i].size(); ++p) {
          if (shapes[j].get(p)) masks[i].set(p, false);
        }
      }
    }
    const bool all_visible =
        std::all_of(masks.begin(), masks.end(),
                    [](const BitMask& m) { return m.count() >= 8; });
    if (all_visible) break;
  }

  Image image(w, h, {40, 40, 40});
  std::vector<std::pair<std::string, BitMask>> objects;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Rgb color = RandomColor(rng);
    for (std::size_t p = 0; p < shapes[i].size(); ++p) {
      if (shapes[i].get(p)) image.set(p, color);
    }
    const auto& label = options.labels[rng() % options.labels.size()];
    objects.emplace_back(label, std::move(masks[i]));
  }
  return make_scene(std::move(image), options.prompt, std::move(objects),
                    "synthetic_" + std::to_string(seed));
}

// Writes <dir>/<stem>.png and <dir>/<stem>.json; returns the JSON path.
inline std::filesystem::path WriteScene(const Scene& scene,
                                        const std::filesystem::path& dir,
                                        const std::string& stem) {
  std::filesystem::create_directories(dir);
  WriteFileBytes(dir / (stem + ".png"), EncodePng(scene.image));
  const auto json_path = dir / (stem + ".json");
  nlohmann::json doc = scene_to_json(scene, stem + ".png");
  doc["id"] = stem;
  WriteFileText(json_path, doc.dump(2) + "\n");
  return json_path;
}

// Scene whose question names exactly one object (the target) and whose other
// objects carry labels the question does not mention. Objects do not overlap.
inline std::pair<Scene, std::size_t> FocusScene(std::uint64_t seed,
                                                std::size_t objects = 4) {
  static const std::vector<std::string> labels = {
      "dog", "bicycle", "umbrella", "bench", "clock", "kite", "vase", "boat"};
  std::mt19937_64 rng(seed);
  const int w = 80;
  const int h = 60;
  Image image(w, h, {40, 40, 40});
  std::vector<std::pair<std::string, BitMask>> parts;
  // Non-overlapping 4x2 grid cells, shuffled.
  std::vector<int> cells = {0, 1, 2, 3, 4, 5, 6, 7};
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<std::string> pool = labels;
  std::shuffle(pool.begin(), pool.end(), rng);
  for (std::size_t i = 0; i < objects; ++i) {
    const int cx = cells[i] % 4;
    const int cy = cells[i] / 4;
    const int bw = 8 + static_cast<int>(rng() % 10);
    const int bh = 8 + static_cast<int>(rng() % 18);
    const Box box{cx * 20 + 1, cy * 30 + 1, cx * 20 + 1 + bw, cy * 30 + 1 + bh};
    BitMask mask = RectMask(w, h, box);
    const Rgb color = RandomColor(rng);
    for (std::size_t p = 0; p < mask.size(); ++p) {
      if (mask.get(p)) image.set(p, color);
    }
    parts.emplace_back(pool[i], std::move(mask));
  }
  const std::size_t target = rng() % objects;
  const std::string question =
      "What colour is the " + pool[target] + " in this picture?";
  Scene scene = make_scene(std::move(image), question, std::move(parts),
                           "focus_" + std::to_string(seed));
  return {std::move(scene), target};
}

// Dataset line for an entry whose scene JSON/PNG already sit in the same
// directory as the dataset file.
inline nlohmann::json DatasetLine(const Scene& scene, const std::string& stem,
                                  std::size_t target_id) {
  nlohmann::json scene_doc = scene_to_json(scene, stem + ".png");
  scene_doc["id"] = stem;
  const Box& b = scene.objects[target_id].bbox;
  return {{"scene", scene_doc},
          {"question", scene.prompt},
          {"target",
           {{"id", target_id}, {"bbox", {b.x_min, b.y_min, b.width(), b.height()}}}}};
}

}  // namespace objshap::synthetic
