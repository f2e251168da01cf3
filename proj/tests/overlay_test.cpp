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

#include "objshap/overlay.hpp"

#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "objshap/synthetic.hpp"
#include "test_util.hpp"

namespace objshap {
namespace {

Scene TwoBlocks() {
  BitMask a(20, 10), b(20, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 5; ++x) a.set(x, y);
    for (int x = 15; x < 20; ++x) b.set(x, y);
  }
  return make_scene(Image(20, 10, {100, 100, 100}), "q", {{"a", a}, {"b", b}});
}

AttributionResult Result(std::vector<double> phi) {
  AttributionResult r;
  r.ranking = rank_objects(phi);
  r.phi = std::move(phi);
  return r;
}

TEST(RampPositions, Examples) {
  EXPECT_EQ(ramp_positions({-0.3}), (std::vector<double>{1.0}));
  EXPECT_EQ(ramp_positions({0.2, 0.2, 0.2}), (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_EQ(ramp_positions({0.9, 0.1}), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(ramp_positions({0.0, 0.5, 1.0, 0.25}),
            (std::vector<double>{0.0, 0.5, 1.0, 0.25}));
}

TEST(ColorRamp, EndpointsAndMonotoneLuminance) {
  for (const char* name : {"viridis", "inferno", "hot", "gray"}) {
    const auto ramp = ColorRamp::Named(name);
    ASSERT_TRUE(ramp.has_value()) << name;
    double prev = -1.0;
    for (int k = 0; k <= 100; ++k) {
      const Rgb c = ramp->at(k / 100.0);
      const double lum = 0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b;
      EXPECT_GE(lum, prev - 1.0) << name << " at " << k;
      prev = lum;
    }
  }
  EXPECT_EQ(ColorRamp::Named("gray")->at(0.0), (Rgb{0, 0, 0}));
  EXPECT_EQ(ColorRamp::Named("gray")->at(1.0), (Rgb{255, 255, 255}));
  EXPECT_FALSE(ColorRamp::Named("rainbow").has_value());
}

TEST(Overlay, TintFollowsNormalisedPhi) {
  const Scene scene = TwoBlocks();
  OverlaySpec spec{"gray", 1.0, false};
  const Image out = render_overlay_image(scene, Result({0.9, 0.1}), spec);
  EXPECT_EQ(out.at(2, 5), (Rgb{255, 255, 255}));  // object 0 at ramp top
  EXPECT_EQ(out.at(17, 5), (Rgb{0, 0, 0}));       // object 1 at ramp bottom
  EXPECT_EQ(out.at(10, 5), (Rgb{100, 100, 100})); // background untouched

  const Image flat = render_overlay_image(scene, Result({0.4, 0.4}), spec);
  EXPECT_EQ(flat.at(2, 5), flat.at(17, 5));
  EXPECT_EQ(flat.at(2, 5), ColorRamp::Named("gray")->at(0.5));

  const Image zero_alpha =
      render_overlay_image(scene, Result({0.9, 0.1}), {"gray", 0.0, false});
  EXPECT_EQ(zero_alpha, scene.image);
}

TEST(Overlay, SingleObjectAtRampTop) {
  BitMask m(4, 4);
  m.set(1, 1);
  const Scene scene = make_scene(Image(4, 4), "q", {{"x", m}});
  const Image out =
      render_overlay_image(scene, Result({-0.5}), {"gray", 1.0, false});
  EXPECT_EQ(out.at(1, 1), (Rgb{255, 255, 255}));
}

TEST(Overlay, AnnotationDrawsText) {
  const Scene scene = synthetic::RandomScene(3);
  std::vector<double> phi(scene.size(), 0.0);
  phi[0] = 1.0;
  const Image plain = render_overlay_image(scene, Result(phi), {"viridis", 0.6, false});
  const Image annotated = render_overlay_image(scene, Result(phi), {});
  EXPECT_NE(plain, annotated);
}

TEST(Overlay, DeterministicBytesAndErrors) {
  const Scene scene = synthetic::RandomScene(5);
  std::vector<double> phi(scene.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = 0.1 * i;
  EXPECT_EQ(render_overlay(scene, Result(phi), {}),
            render_overlay(scene, Result(phi), {}));
  EXPECT_OBJSHAP_ERROR(render_overlay(scene, Result({0.1}), {}),
                       ErrorCode::kMismatchedResult);
  EXPECT_OBJSHAP_ERROR(render_overlay(scene, Result(phi), {"viridis", 1.5, true}),
                       ErrorCode::kConfigError);
  EXPECT_OBJSHAP_ERROR(render_overlay(scene, Result(phi), {"jet", 0.5, true}),
                       ErrorCode::kConfigError);
}

}  // namespace
}  // namespace objshap
