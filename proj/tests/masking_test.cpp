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

#include "objshap/masking.hpp"

#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "objshap/synthetic.hpp"
#include "test_util.hpp"

namespace objshap {
namespace {

constexpr Rgb kBackground{10, 20, 30};
constexpr Rgb kRed{200, 0, 0};
constexpr Rgb kBlue{0, 0, 200};

// 16x16 masks drawn by hand; '#' marks a set pixel.
BitMask FromArt(const std::vector<std::string>& rows) {
  BitMask mask(16, 16);
  for (std::size_t y = 0; y < rows.size(); ++y) {
    for (std::size_t x = 0; x < rows[y].size(); ++x) {
      if (rows[y][x] == '#') mask.set(static_cast<int>(x), static_cast<int>(y));
    }
  }
  return mask;
}

const std::vector<std::string> kArtA = {
    "................", "................", "..#####.........",
    "..######........", "..######........", "..###...........",
    "..###...........", "..###...........",
};

const std::vector<std::string> kArtB = {
    "................", "................", "................",
    "................", "....#######.....", "....#######.....",
    "....#######.....", "....#######.....", "....#######.....",
    "....#######.....", "....#######.....",
};

Scene Fixture() {
  const BitMask a = FromArt(kArtA);
  const BitMask b = FromArt(kArtB);
  Image image(16, 16, kBackground);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.get(i)) image.set(i, kRed);
    if (b.get(i)) image.set(i, kBlue);
  }
  return make_scene(image, "p", {{"a", a}, {"b", b}}, "fixture");
}

struct Case {
  MaskingKind kind;
  std::uint64_t visible;
  std::vector<std::string> expected;
};

const std::vector<Case>& Cases() {
  static const std::vector<Case> cases = {
      {MaskingKind::kPrecise, 0b10, kArtA},
      {MaskingKind::kBBox, 0b10,
       {"", "", "..######", "..######", "..######", "..######", "..######",
        "..######"}},
      {MaskingKind::kBBOA, 0b10,
       {"", "", "..######", "..######", "..##", "..##", "..##", "..##"}},
      {MaskingKind::kPrecise, 0b01, kArtB},
      {MaskingKind::kBBox, 0b01, kArtB},
      {MaskingKind::kBBOA, 0b01,
       {"", "", "", "", "........###", ".....######", ".....######",
        ".....######", "....#######", "....#######", "....#######"}},
      {MaskingKind::kPrecise, 0b00,
       {"", "", "..#####", "..######", "..#########", "..#########",
        "..#########", "..#########", "....#######", "....#######",
        "....#######"}},
      {MaskingKind::kBBox, 0b00,
       {"", "", "..######", "..######", "..#########", "..#########",
        "..#########", "..#########", "....#######", "....#######",
        "....#######"}},
      {MaskingKind::kBBOA, 0b00,
       {"", "", "..######", "..######", "..#########", "..#########",
        "..#########", "..#########", "....#######", "....#######",
        "....#######"}},
  };
  return cases;
}

TEST(Masking, HandDrawnFixturesArePixelExact) {
  const Scene scene = Fixture();
  for (const Case& c : Cases()) {
    const Coalition coalition(c.visible, 2);
    const BitMask expected = FromArt(c.expected);
    const MaskingStrategy strategy{c.kind, FillSpec::Solid({128, 128, 128})};
    const Image out = apply_masking(scene, coalition, strategy);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        const Rgb want = expected.get(x, y) ? Rgb{128, 128, 128}
                                            : scene.image.at(x, y);
        ASSERT_EQ(out.at(x, y), want)
            << MaskingKindName(c.kind) << " visible=" << coalition.hex()
            << " at (" << x << "," << y << ")";
      }
    }
    EXPECT_EQ(hidden_region(scene, coalition, c.kind), expected);
  }
}

TEST(Masking, FullCoalitionIsIdentity) {
  const Scene scene = Fixture();
  for (MaskingKind kind :
       {MaskingKind::kPrecise, MaskingKind::kBBox, MaskingKind::kBBOA}) {
    const Image out =
        apply_masking(scene, Coalition::Full(2), {kind, FillSpec::Mean()});
    EXPECT_EQ(out, scene.image);
    EXPECT_EQ(out.digest(), scene.image.digest());
  }
}

TEST(Masking, MeanFillUsesPerChannelMean) {
  Image image(2, 1);
  image.set(0, 0, {0, 10, 255});
  image.set(1, 0, {3, 20, 254});
  // (0+3)/2 = 1.5 -> 2, (10+20)/2 = 15, (255+254)/2 = 254.5 -> 255
  EXPECT_EQ(FillSpec::Mean().resolve(image), (Rgb{2, 15, 255}));

  const Scene scene = Fixture();
  const Image out = apply_masking(scene, Coalition::Of({1}, 2),
                                  {MaskingKind::kPrecise, FillSpec::Mean()});
  EXPECT_EQ(out.at(2, 2), FillSpec::Mean().resolve(scene.image));
}

TEST(Masking, InvalidCoalition) {
  const Scene scene = Fixture();
  EXPECT_OBJSHAP_ERROR(hidden_region(scene, Coalition(0b1, 3),
                                     MaskingKind::kBBOA),
                       ErrorCode::kInvalidCoalition);
  EXPECT_OBJSHAP_ERROR(hidden_region(scene, Coalition(0b100, 2),
                                     MaskingKind::kBBOA),
                       ErrorCode::kInvalidCoalition);
}

TEST(Masking, RegionPropertiesOnRandomScenes) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    synthetic::RandomSceneOptions opts;
    opts.objects = 2 + trial % 6;
    const Scene scene = synthetic::RandomScene(1000 + trial, opts);
    const std::size_t n = scene.size();
    for (int k = 0; k < 10; ++k) {
      const Coalition c(rng() & Coalition::FullBits(n), n);
      const BitMask precise = hidden_region(scene, c, MaskingKind::kPrecise);
      const BitMask bbox = hidden_region(scene, c, MaskingKind::kBBox);
      const BitMask bboa = hidden_region(scene, c, MaskingKind::kBBOA);
      for (std::size_t i = 0; i < bbox.size(); ++i) {
        if (bboa.get(i)) {
          ASSERT_TRUE(bbox.get(i));
        }
        if (precise.get(i)) {
          ASSERT_TRUE(bbox.get(i));
        }
        // BBOA never paints a visible object's pixels.
        for (std::size_t id : c.members()) {
          if (scene.objects[id].mask.get(i)) {
            ASSERT_FALSE(bboa.get(i));
          }
        }
      }
      const Image out = apply_masking(scene, c, {MaskingKind::kBBOA, {}});
      for (std::size_t i = 0; i < bboa.size(); ++i) {
        if (!bboa.get(i)) {
          ASSERT_EQ(out.at(i), scene.image.at(i));
        } else {
          ASSERT_EQ(out.at(i), (Rgb{128, 128, 128}));
        }
      }
    }
  }
}

TEST(Masking, BboaRevealsOnlyVisibleObjects) {
  // B sits inside A's box. Hiding both must paint B's pixels too.
  const Scene scene = Fixture();
  const BitMask both = hidden_region(scene, Coalition::Empty(2),
                                     MaskingKind::kBBOA);
  EXPECT_TRUE(both.get(5, 5));
  const BitMask only_a = hidden_region(scene, Coalition::Of({1}, 2),
                                       MaskingKind::kBBOA);
  EXPECT_FALSE(only_a.get(5, 5));
}

TEST(Coalition, HexNaming) {
  EXPECT_EQ(Coalition(0b101, 3).hex(), "5");
  EXPECT_EQ(Coalition(0x1F, 5).hex(), "1f");
  EXPECT_EQ(Coalition(0x3, 12).hex(), "003");
  EXPECT_EQ(Coalition::Full(64).hex(), "ffffffffffffffff");
  EXPECT_EQ(Coalition::Of({0, 2}, 4).members(),
            (std::vector<std::size_t>{0, 2}));
}

TEST(MaskingKind, ParseAndName) {
  for (MaskingKind kind :
       {MaskingKind::kPrecise, MaskingKind::kBBox, MaskingKind::kBBOA}) {
    EXPECT_EQ(ParseMaskingKind(MaskingKindName(kind)), kind);
  }
  EXPECT_FALSE(ParseMaskingKind("blur").has_value());
}

}  // namespace
}  // namespace objshap
