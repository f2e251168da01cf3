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

#include "objshap/scene.hpp"

#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gtest/gtest.h"
#include "json.hpp"
#include "objshap/synthetic.hpp"
#include "test_util.hpp"

namespace objshap {
namespace {

using Ring = std::vector<std::pair<double, double>>;

// Oracle: per-pixel PNPOLY test of the pixel center.
bool CenterInside(const Ring& ring, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto [xi, yi] = ring[i];
    const auto [xj, yj] = ring[j];
    if (((yi > py) != (yj > py)) &&
        (px < (xj - xi) * (py - yi) / (yj - yi) + xi)) {
      inside = !inside;
    }
  }
  return inside;
}

std::set<std::pair<int, int>> EnumerateInside(const Ring& ring, int w, int h) {
  std::set<std::pair<int, int>> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (CenterInside(ring, x + 0.5, y + 0.5)) out.insert({x, y});
    }
  }
  return out;
}

std::set<std::pair<int, int>> TruePixels(const BitMask& mask) {
  std::set<std::pair<int, int>> out;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) out.insert({x, y});
    }
  }
  return out;
}

// Oracle for COCO's compact RLE strings (encoder side of the format).
std::string CocoRleString(const std::vector<long long>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    long long x = counts[i];
    if (i > 2) x -= counts[i - 2];
    bool more = true;
    while (more) {
      long long c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

TEST(DecodeMask, RleRowMajor) {
  const BitMask mask = decode_mask(RleEncoding{{4, 2, 6}}, 4, 3);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    EXPECT_EQ(mask.get(i), i == 4 || i == 5) << "pixel " << i;
  }
}

TEST(DecodeMask, RleSumMismatchIsMalformed) {
  EXPECT_OBJSHAP_ERROR(decode_mask(RleEncoding{{5, 5}}, 3, 3),
                       ErrorCode::kMalformedEncoding);
  EXPECT_OBJSHAP_ERROR(decode_mask(RleEncoding{{3, 3}}, 3, 3),
                       ErrorCode::kMalformedEncoding);
  EXPECT_OBJSHAP_ERROR(decode_mask(RleEncoding{{-1, 10}}, 3, 3),
                       ErrorCode::kMalformedEncoding);
}

TEST(DecodeMask, SquarePolygonMatchesCenterEnumeration) {
  const Ring square = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  const auto expected = EnumerateInside(square, 8, 8);
  ASSERT_EQ(expected.size(), 16u);
  const BitMask mask = decode_mask(PolygonEncoding{{square}}, 8, 8);
  EXPECT_EQ(TruePixels(mask), expected);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_TRUE(mask.get(x, y));
  }
}

TEST(DecodeMask, RandomPolygonsMatchOracle) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> coord(-3.0, 27.0);
  for (int trial = 0; trial < 200; ++trial) {
    Ring ring(3 + rng() % 6);
    for (auto& p : ring) p = {coord(rng), coord(rng)};
    const BitMask mask = decode_mask(PolygonEncoding{{ring}}, 24, 20);
    EXPECT_EQ(TruePixels(mask), EnumerateInside(ring, 24, 20))
        << "trial " << trial;
  }
}

TEST(DecodeMask, PolygonNeedsThreeVertices) {
  EXPECT_OBJSHAP_ERROR(
      decode_mask(PolygonEncoding{{{{0, 0}, {4, 4}}}}, 8, 8),
      ErrorCode::kMalformedEncoding);
}

TEST(DecodeMask, MultipleRingsAreUnioned) {
  const Ring a = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const Ring b = {{5, 5}, {7, 5}, {7, 7}, {5, 7}};
  const BitMask mask = decode_mask(PolygonEncoding{{a, b}}, 8, 8);
  EXPECT_EQ(mask.count(), 8u);
  EXPECT_TRUE(mask.get(0, 0));
  EXPECT_TRUE(mask.get(6, 6));
}

TEST(DecodeMask, ColumnMajorAndCocoString) {
  // 3 wide x 2 high; column-major index 2 is (x=1, y=0).
  const BitMask mask = decode_mask(RleEncoding{{2, 1, 3}, true}, 3, 2);
  EXPECT_EQ(TruePixels(mask), (std::set<std::pair<int, int>>{{1, 0}}));

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<long long> counts;
    long long total = 0;
    while (total < 300) {
      const long long run = static_cast<long long>(rng() % 70);
      counts.push_back(std::min(run, 300 - total));
      total += counts.back();
    }
    const auto decoded = detail::DecodeCocoRleString(CocoRleString(counts));
    EXPECT_EQ(decoded, counts);
  }
}

TEST(DecodeMask, BitmapFileAndDimensionCheck) {
  testing::TempDir dir;
  Image raster(5, 4);
  raster.set(2, 1, {255, 255, 255});
  raster.set(3, 3, {0, 1, 0});
  WriteFileBytes(dir / "m.png", EncodePng(raster));
  const BitMask mask = decode_mask(BitmapEncoding{"m.png"}, 5, 4, dir.path());
  EXPECT_EQ(TruePixels(mask), (std::set<std::pair<int, int>>{{2, 1}, {3, 3}}));
  EXPECT_OBJSHAP_ERROR(decode_mask(BitmapEncoding{"m.png"}, 4, 4, dir.path()),
                       ErrorCode::kMalformedEncoding);
}

TEST(BboxOf, Examples) {
  BitMask single(10, 10);
  single.set(3, 7);
  EXPECT_EQ(bbox_of(single), (Box{3, 7, 4, 8}));

  BitMask pair(10, 10);
  pair.set(1, 1);
  pair.set(5, 2);
  EXPECT_EQ(bbox_of(pair), (Box{1, 1, 6, 3}));

  BitMask full(4, 4);
  for (std::size_t i = 0; i < full.size(); ++i) full.set(i);
  EXPECT_EQ(bbox_of(full), (Box{0, 0, 4, 4}));
}

TEST(BboxOf, TightOnRandomMasks) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    BitMask mask(1 + rng() % 20, 1 + rng() % 20);
    const int k = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < k; ++i) mask.set(rng() % mask.size());
    const Box b = bbox_of(mask);
    bool top = false, bottom = false, left = false, right = false;
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        if (!mask.get(x, y)) continue;
        ASSERT_TRUE(b.contains(x, y));
        top |= y == b.y_min;
        bottom |= y == b.y_max - 1;
        left |= x == b.x_min;
        right |= x == b.x_max - 1;
      }
    }
    // Every edge touches a true pixel, so no tighter box exists.
    EXPECT_TRUE(top && bottom && left && right);
  }
}

TEST(Rle, RoundTripProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    BitMask mask(1 + rng() % 30, 1 + rng() % 30);
    const double density = static_cast<double>(rng() % 100) / 100.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (static_cast<double>(rng() % 1000) / 1000.0 < density) mask.set(i);
    }
    EXPECT_EQ(decode_mask(encode_rle(mask), mask.width(), mask.height()),
              mask);
  }
}

nlohmann::json TwoObjectDoc() {
  return nlohmann::json::parse(R"({
    "prompt": "What is here?",
    "objects": [
      {"label": "dog", "segmentation": {"type": "rle", "counts": [4, 2, 6]}},
      {"label": "ball", "segmentation": {"type": "polygon",
        "points": [[0, 2], [2, 2], [2, 3], [0, 3]]}, "bbox": [0, 2, 2, 1]}
    ]})");
}

TEST(LoadScene, TwoObjects) {
  const Scene scene = load_scene(Image(4, 3), TwoObjectDoc());
  ASSERT_EQ(scene.size(), 2u);
  EXPECT_EQ(scene.objects[0].id, 0u);
  EXPECT_EQ(scene.objects[1].id, 1u);
  EXPECT_EQ(scene.objects[0].label, "dog");
  EXPECT_EQ(scene.objects[0].bbox, (Box{0, 1, 2, 2}));
  EXPECT_EQ(scene.objects[1].bbox, (Box{0, 2, 2, 3}));
  EXPECT_EQ(scene.objects[1].area, 2u);
  EXPECT_EQ(scene.prompt, "What is here?");
  EXPECT_TRUE(scene.warnings.empty());
}

TEST(LoadScene, WrongMaskDimensions) {
  auto doc = TwoObjectDoc();
  doc["objects"][0]["segmentation"]["size"] = {5, 5};
  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), doc),
                       ErrorCode::kDimensionMismatch);
}

TEST(LoadScene, BitmapWrongDimensions) {
  testing::TempDir dir;
  Image raster(6, 6, {255, 255, 255});
  WriteFileBytes(dir / "m.png", EncodePng(raster));
  nlohmann::json doc = {
      {"objects",
       {{{"label", "x"},
         {"segmentation", {{"type", "bitmap"}, {"path", "m.png"}}}}}}};
  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), doc, dir.path()),
                       ErrorCode::kDimensionMismatch);
}

TEST(LoadScene, EmptyObjectList) {
  const nlohmann::json doc = {{"prompt", "p"}, {"objects", nlohmann::json::array()}};
  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), doc),
                       ErrorCode::kEmptyObjectList);
}

TEST(LoadScene, SchemaErrors) {
  auto missing_label = TwoObjectDoc();
  missing_label["objects"][0].erase("label");
  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), missing_label),
                       ErrorCode::kSchemaError);

  auto bad_type = TwoObjectDoc();
  bad_type["objects"][0]["segmentation"]["type"] = "blob";
  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), bad_type),
                       ErrorCode::kSchemaError);

  auto empty_mask = TwoObjectDoc();
  empty_mask["objects"][0]["segmentation"]["counts"] = {12};
  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), empty_mask),
                       ErrorCode::kSchemaError);

  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), nlohmann::json::array()),
                       ErrorCode::kSchemaError);
}

TEST(LoadScene, AnnotatedBboxIsCrossCheckedButMaskWins) {
  auto doc = TwoObjectDoc();
  doc["objects"][1]["bbox"] = {0, 2, 3, 1};  // off by one: tolerated silently
  EXPECT_TRUE(load_scene(Image(4, 3), doc).warnings.empty());
  doc["objects"][1]["bbox"] = {0, 0, 4, 3};  // off by two
  const Scene scene = load_scene(Image(4, 3), doc);
  ASSERT_EQ(scene.warnings.size(), 1u);
  EXPECT_EQ(scene.objects[1].bbox, (Box{0, 2, 2, 3}));
}

TEST(LoadScene, OverlappingMasksAllowed) {
  auto doc = TwoObjectDoc();
  doc["objects"][1]["segmentation"] = {{"type", "rle"}, {"counts", {4, 4, 4}}};
  const Scene scene = load_scene(Image(4, 3), doc);
  EXPECT_TRUE(scene.objects[0].mask.get(0, 1));
  EXPECT_TRUE(scene.objects[1].mask.get(0, 1));
}

TEST(LoadScene, FileRoundTripIsDeterministic) {
  testing::TempDir dir;
  const Scene original = synthetic::RandomScene(11);
  const auto path = synthetic::WriteScene(original, dir.path(), "s");
  const Scene a = load_scene_file(path);
  const Scene b = load_scene_file(path);
  EXPECT_EQ(a.id, "s");
  EXPECT_EQ(a.image, original.image);
  ASSERT_EQ(a.size(), original.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.objects[i].mask, original.objects[i].mask);
    EXPECT_EQ(a.objects[i].mask, b.objects[i].mask);
    EXPECT_EQ(a.objects[i].bbox, b.objects[i].bbox);
    EXPECT_EQ(a.objects[i].label, b.objects[i].label);
  }
}

TEST(LoadScene, TooManyObjects) {
  nlohmann::json doc = {{"objects", nlohmann::json::array()}};
  for (int i = 0; i < 65; ++i) {
    doc["objects"].push_back(
        {{"label", "o"}, {"segmentation", {{"type", "rle"}, {"counts", {0, 12}}}}});
  }
  EXPECT_OBJSHAP_ERROR(load_scene(Image(4, 3), doc), ErrorCode::kSchemaError);
}

}  // namespace
}  // namespace objshap
