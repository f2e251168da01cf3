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
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "objshap/error.hpp"
#include "objshap/image.hpp"

namespace objshap {

// Largest object count a scene may carry; coalitions are 64-bit sets.
inline constexpr std::size_t kMaxObjects = 64;

// Row-major boolean raster; true marks pixels that belong to an object.
class BitMask {
 public:
  BitMask() = default;
  BitMask(int width, int height)
      : width_(width),
        height_(height),
        bits_(static_cast<std::size_t>(width) * height, 0) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "mask dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool get(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  bool get(std::size_t index) const { return bits_[index] != 0; }
  void set(int x, int y, bool value = true) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
  }
  void set(std::size_t index, bool value = true) {
    bits_[index] = value ? 1 : 0;
  }

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool any() const {
    return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) !=
           bits_.end();
  }
  bool same_shape(const BitMask& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Pixel rectangle, half-open on the max edges.
struct Box {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  long long area() const {
    return static_cast<long long>(width()) * height();
  }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool within(int image_width, int image_height) const {
    return valid() && x_min >= 0 && y_min >= 0 && x_max <= image_width &&
           y_max <= image_height;
  }
  bool contains(int x, int y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  // COCO-style [x, y, w, h].
  static Box FromXywh(int x, int y, int w, int h) { return {x, y, x + w, y + h}; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Tightest box around the true pixels. The mask must be non-empty.
inline Box bbox_of(const BitMask& mask) {
  Box box{mask.width(), mask.height(), 0, 0};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y)) continue;
      box.x_min = std::min(box.x_min, x);
      box.y_min = std::min(box.y_min, y);
      box.x_max = std::max(box.x_max, x + 1);
      box.y_max = std::max(box.y_max, y + 1);
    }
  }
  return box;
}

struct ObjectEntity {
  std::size_t id = 0;
  std::string label;
  BitMask mask;
  Box bbox;
  std::size_t area = 0;  // true-pixel count of mask
};

// Immutable after load; safe to share between threads.
struct Scene {
  std::string id;
  Image image;
  std::vector<ObjectEntity> objects;
  std::string prompt;
  std::vector<std::string> warnings;

  std::size_t size() const { return objects.size(); }
};

// ---------------------------------------------------------------------------
// Mask encodings

struct RleEncoding {
  std::vector<long long> counts;  // alternating runs, starting with false
  bool column_major = false;
};

struct PolygonEncoding {
  // One or more rings; the mask is their union, each ring even-odd filled.
  std::vector<std::vector<std::pair<double, double>>> rings;
};

struct BitmapEncoding {
  std::filesystem::path path;  // single-channel image, nonzero = object
};

using MaskEncoding = std::variant<RleEncoding, PolygonEncoding, BitmapEncoding>;

namespace detail {

inline void FillRing(const std::vector<std::pair<double, double>>& ring,
                     BitMask& mask) {
  if (ring.size() < 3) {
    throw Error(ErrorCode::kMalformedEncoding,
                "polygon needs at least 3 vertices, got " +
                    std::to_string(ring.size()));
  }
  std::vector<double> crossings;
  for (int y = 0; y < mask.height(); ++y) {
    const double yc = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const auto [xi, yi] = ring[i];
      const auto [xj, yj] = ring[j];
      if ((yi > yc) != (yj > yc)) {
        crossings.push_back(xi + (yc - yi) * (xj - xi) / (yj - yi));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Pixel centers strictly left of the closing crossing and at or right
      // of the opening crossing.
      const int x_begin =
          std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int x_end = std::min(
          mask.width(), static_cast<int>(std::ceil(crossings[k + 1] - 0.5)));
      for (int x = x_begin; x < x_end; ++x) mask.set(x, y, true);
    }
  }
}

// COCO's compact string form of RLE counts (LEB128-like, delta coded).
inline std::vector<long long> DecodeCocoRleString(const std::string& s) {
  std::vector<long long> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) {
        throw Error(ErrorCode::kMalformedEncoding, "truncated RLE string");
      }
      const long long c = static_cast<long long>(s[p]) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    counts.push_back(x);
  }
  return counts;
}

}  // namespace detail

inline BitMask decode_mask(const MaskEncoding& encoding, int width,
                           int height,
                           const std::filesystem::path& base_dir = {}) {
  BitMask mask(width, height);
  if (const auto* rle = std::get_if<RleEncoding>(&encoding)) {
    const std::size_t total = mask.size();
    std::size_t pos = 0;
    bool value = false;
    for (long long run : rle->counts) {
      if (run < 0 || static_cast<std::size_t>(run) > total - pos) {
        throw Error(ErrorCode::kMalformedEncoding,
                    "RLE runs overflow the " + std::to_string(width) + "x" +
                        std::to_string(height) + " raster");
      }
      if (value) {
        for (std::size_t k = pos; k < pos + run; ++k) {
          if (rle->column_major) {
            const auto x = static_cast<int>(k / height);
            const auto y = static_cast<int>(k % height);
            mask.set(x, y, true);
          } else {
            mask.set(k, true);
          }
        }
      }
      pos += static_cast<std::size_t>(run);
      value = !value;
    }
    if (pos != total) {
      throw Error(ErrorCode::kMalformedEncoding,
                  "RLE runs sum to " + std::to_string(pos) + ", expected " +
                      std::to_string(total));
    }
  } else if (const auto* poly = std::get_if<PolygonEncoding>(&encoding)) {
    if (poly->rings.empty()) {
      throw Error(ErrorCode::kMalformedEncoding, "polygon has no rings");
    }
    for (const auto& ring : poly->rings) {
      BitMask ring_mask(width, height);
      detail::FillRing(ring, ring_mask);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (ring_mask.get(i)) mask.set(i, true);
      }
    }
  } else {
    const auto& bitmap = std::get<BitmapEncoding>(encoding);
    const auto path = bitmap.path.is_absolute() || base_dir.empty()
                          ? bitmap.path
                          : base_dir / bitmap.path;
    const Image raster = DecodePng(ReadFileBytes(path));
    if (raster.width() != width || raster.height() != height) {
      throw Error(ErrorCode::kMalformedEncoding,
                  "bitmap " + path.string() + " is " +
                      std::to_string(raster.width()) + "x" +
                      std::to_string(raster.height()) + ", expected " +
                      std::to_string(width) + "x" + std::to_string(height));
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const Rgb c = raster.at(i);
      mask.set(i, c.r != 0 || c.g != 0 || c.b != 0);
    }
  }
  return mask;
}

// Row-major run lengths, first run counts false pixels.
inline RleEncoding encode_rle(const BitMask& mask) {
  RleEncoding rle;
  bool value = false;
  long long run = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.get(i) != value) {
      rle.counts.push_back(run);
      run = 0;
      value = !value;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

// ---------------------------------------------------------------------------
// Scene JSON

namespace detail {

inline const nlohmann::json& Require(const nlohmann::json& doc,
                                     const char* key,
                                     const std::string& where) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw Error(ErrorCode::kSchemaError,
                where + ": missing field \"" + key + "\"");
  }
  return doc.at(key);
}

inline MaskEncoding ParseSegmentation(const nlohmann::json& seg,
                                      const std::string& where, int width,
                                      int height) {
  const auto& type = Require(seg, "type", where);
  if (!type.is_string()) {
    throw Error(ErrorCode::kSchemaError, where + ": type must be a string");
  }
  const std::string kind = type.get<std::string>();
  if (kind == "rle") {
    RleEncoding rle;
    if (seg.contains("size")) {
      const auto& size = seg.at("size");
      if (!size.is_array() || size.size() != 2) {
        throw Error(ErrorCode::kSchemaError, where + ": size must be [h, w]");
      }
      if (size[0].get<int>() != height || size[1].get<int>() != width) {
        throw Error(ErrorCode::kDimensionMismatch,
                    where + ": mask size [" + size[0].dump() + ", " +
                        size[1].dump() + "] does not match image " +
                        std::to_string(height) + "x" + std::to_string(width));
      }
    }
    const auto& counts = Require(seg, "counts", where);
    if (counts.is_string()) {
      rle.counts = DecodeCocoRleString(counts.get<std::string>());
      rle.column_major = true;
    } else if (counts.is_array()) {
      for (const auto& c : counts) {
        if (!c.is_number_integer()) {
          throw Error(ErrorCode::kSchemaError,
                      where + ": RLE counts must be integers");
        }
        rle.counts.push_back(c.get<long long>());
      }
      rle.column_major = seg.value("order", std::string("row")) == "column";
    } else {
      throw Error(ErrorCode::kSchemaError, where + ": bad RLE counts");
    }
    return rle;
  }
  if (kind == "polygon") {
    PolygonEncoding poly;
    if (seg.contains("points")) {
      std::vector<std::pair<double, double>> ring;
      for (const auto& pt : seg.at("points")) {
        if (!pt.is_array() || pt.size() != 2) {
          throw Error(ErrorCode::kSchemaError,
                      where + ": polygon points must be [x, y] pairs");
        }
        ring.emplace_back(pt[0].get<double>(), pt[1].get<double>());
      }
      poly.rings.push_back(std::move(ring));
    } else {
      // COCO form: list of flat [x0, y0, x1, y1, ...] rings.
      for (const auto& flat : Require(seg, "polygons", where)) {
        if (!flat.is_array() || flat.size() % 2 != 0) {
          throw Error(ErrorCode::kSchemaError,
                      where + ": flat polygon needs an even coordinate count");
        }
        std::vector<std::pair<double, double>> ring;
        for (std::size_t k = 0; k < flat.size(); k += 2) {
          ring.emplace_back(flat[k].get<double>(), flat[k + 1].get<double>());
        }
        poly.rings.push_back(std::move(ring));
      }
    }
    return poly;
  }
  if (kind == "bitmap") {
    return BitmapEncoding{Require(seg, "path", where).get<std::string>()};
  }
  throw Error(ErrorCode::kSchemaError,
              where + ": unknown segmentation type \"" + kind + "\"");
}

}  // namespace detail

// Builds a validated Scene from an already decoded image and the annotation
// document. Bitmap references resolve against base_dir.
inline Scene load_scene(Image image, const nlohmann::json& doc,
                        const std::filesystem::path& base_dir = {}) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kSchemaError, "scene document must be an object");
  }
  Scene scene;
  scene.image = std::move(image);
  const int width = scene.image.width();
  const int height = scene.image.height();
  if (scene.image.empty()) {
    throw Error(ErrorCode::kSchemaError, "scene image is empty");
  }

  try {
    if (doc.contains("prompt")) {
      scene.prompt = doc.at("prompt").get<std::string>();
    }
    scene.id = doc.value("id", std::string());
    const auto& objects = detail::Require(doc, "objects", "scene");
    if (!objects.is_array()) {
      throw Error(ErrorCode::kSchemaError, "scene: objects must be an array");
    }
    if (objects.empty()) {
      throw Error(ErrorCode::kEmptyObjectList, "scene has no objects");
    }
    if (objects.size() > kMaxObjects) {
      throw Error(ErrorCode::kSchemaError,
                  "scene has " + std::to_string(objects.size()) +
                      " objects; at most " + std::to_string(kMaxObjects) +
                      " are supported");
    }

    for (std::size_t i = 0; i < objects.size(); ++i) {
      const std::string where = "objects[" + std::to_string(i) + "]";
      const auto& obj = objects[i];
      ObjectEntity entity;
      entity.id = i;
      entity.label = detail::Require(obj, "label", where).get<std::string>();
      const auto encoding = detail::ParseSegmentation(
          detail::Require(obj, "segmentation", where), where, width, height);
      if (const auto* bitmap = std::get_if<BitmapEncoding>(&encoding)) {
        const auto path = bitmap->path.is_absolute() || base_dir.empty()
                              ? bitmap->path
                              : base_dir / bitmap->path;
        const Image raster = DecodePng(ReadFileBytes(path));
        if (raster.width() != width || raster.height() != height) {
          throw Error(ErrorCode::kDimensionMismatch,
                      where + ": bitmap is " + std::to_string(raster.width()) +
                          "x" + std::to_string(raster.height()) +
                          ", image is " + std::to_string(width) + "x" +
                          std::to_string(height));
        }
      }
      entity.mask = decode_mask(encoding, width, height, base_dir);
      entity.area = entity.mask.count();
      if (entity.area == 0) {
        throw Error(ErrorCode::kSchemaError, where + ": mask is empty");
      }
      entity.bbox = bbox_of(entity.mask);
      if (obj.contains("bbox") && !obj.at("bbox").is_null()) {
        const auto& b = obj.at("bbox");
        if (!b.is_array() || b.size() != 4) {
          throw Error(ErrorCode::kSchemaError,
                      where + ": bbox must be [x, y, w, h]");
        }
        const double bx = b[0].get<double>();
        const double by = b[1].get<double>();
        const double bx2 = bx + b[2].get<double>();
        const double by2 = by + b[3].get<double>();
        const double worst = std::max(
            {std::abs(bx - entity.bbox.x_min), std::abs(by - entity.bbox.y_min),
             std::abs(bx2 - entity.bbox.x_max),
             std::abs(by2 - entity.bbox.y_max)});
        if (worst > 1.0) {
          scene.warnings.push_back(where +
                                   ": annotated bbox disagrees with mask by " +
                                   std::to_string(worst) +
                                   " px; using mask bounds");
        }
      }
      scene.objects.push_back(std::move(entity));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  }
  return scene;
}

// Reads a scene JSON file; the "image" field resolves relative to the file.
inline Scene load_scene_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    const auto bytes = ReadFileBytes(path);
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  if (!doc.is_object() || !doc.contains("image") || !doc["image"].is_string()) {
    throw Error(ErrorCode::kSchemaError,
                path.string() + ": missing field \"image\"");
  }
  const std::filesystem::path image_ref = doc["image"].get<std::string>();
  const auto image_path = image_ref.is_absolute() ? image_ref : base / image_ref;
  Scene scene = load_scene(DecodePng(ReadFileBytes(image_path)), doc, base);
  if (scene.id.empty()) scene.id = path.stem().string();
  return scene;
}

// Serialises masks as row-major RLE so the document is self-contained apart
// from the image reference.
inline nlohmann::json scene_to_json(const Scene& scene,
                                    const std::string& image_ref) {
  nlohmann::json doc;
  if (!scene.id.empty()) doc["id"] = scene.id;
  doc["image"] = image_ref;
  doc["prompt"] = scene.prompt;
  doc["objects"] = nlohmann::json::array();
  for (const auto& obj : scene.objects) {
    nlohmann::json o;
    o["label"] = obj.label;
    o["segmentation"] = {{"type", "rle"},
                         {"size", {obj.mask.height(), obj.mask.width()}},
                         {"counts", encode_rle(obj.mask).counts}};
    o["bbox"] = {obj.bbox.x_min, obj.bbox.y_min, obj.bbox.width(),
                 obj.bbox.height()};
    doc["objects"].push_back(std::move(o));
  }
  return doc;
}

// Assembles a scene directly from masks; used by tools and fixtures.
inline Scene make_scene(Image image, std::string prompt,
                        std::vector<std::pair<std::string, BitMask>> objects,
                        std::string id = {}) {
  if (objects.empty()) {
    throw Error(ErrorCode::kEmptyObjectList, "scene has no objects");
  }
  if (objects.size() > kMaxObjects) {
    throw Error(ErrorCode::kSchemaError, "too many objects");
  }
  Scene scene;
  scene.id = std::move(id);
  scene.image = std::move(image);
  scene.prompt = std::move(prompt);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    auto& [label, mask] = objects[i];
    if (mask.width() != scene.image.width() ||
        mask.height() != scene.image.height()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "mask " + std::to_string(i) + " does not match the image");
    }
    ObjectEntity entity;
    entity.id = i;
    entity.label = std::move(label);
    entity.mask = std::move(mask);
    entity.area = entity.mask.count();
    if (entity.area == 0) {
      throw Error(ErrorCode::kSchemaError,
                  "mask " + std::to_string(i) + " is empty");
    }
    entity.bbox = bbox_of(entity.mask);
    scene.objects.push_back(std::move(entity));
  }
  return scene;
}

}  // namespace objshap
