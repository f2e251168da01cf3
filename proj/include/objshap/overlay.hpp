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
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "objshap/error.hpp"
#include "objshap/image.hpp"
#include "objshap/scene.hpp"
#include "objshap/shapley.hpp"

namespace objshap {

struct OverlaySpec {
  std::string colormap = "viridis";
  double alpha = 0.6;
  bool annotate = true;
};

// Piecewise-linear colour ramps, monotone in luminance.
class ColorRamp {
 public:
  static std::optional<ColorRamp> Named(std::string_view name) {
    if (name == "viridis") {
      return ColorRamp({{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                        {94, 201, 98}, {253, 231, 37}});
    }
    if (name == "inferno") {
      return ColorRamp({{0, 0, 4}, {87, 16, 110}, {188, 55, 84},
                        {249, 142, 9}, {252, 255, 164}});
    }
    if (name == "hot") {
      return ColorRamp({{0, 0, 0}, {255, 0, 0}, {255, 255, 0},
                        {255, 255, 255}});
    }
    if (name == "gray") return ColorRamp({{0, 0, 0}, {255, 255, 255}});
    return std::nullopt;
  }

  // t in [0, 1]; 0 is the ramp bottom, 1 the top.
  Rgb at(double t) const {
    t = std::clamp(t, 0.0, 1.0);
    const double pos = t * static_cast<double>(stops_.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, stops_.size() - 1);
    const double f = pos - static_cast<double>(lo);
    auto mix = [f](std::uint8_t a, std::uint8_t b) {
      return static_cast<std::uint8_t>(std::lround(a + f * (b - a)));
    };
    return {mix(stops_[lo].r, stops_[hi].r), mix(stops_[lo].g, stops_[hi].g),
            mix(stops_[lo].b, stops_[hi].b)};
  }

 private:
  explicit ColorRamp(std::vector<Rgb> stops) : stops_(std::move(stops)) {}
  std::vector<Rgb> stops_;
};

// Ramp position per object: min-max normalised phi. A single object sits at
// the top; all-equal phi over several objects sits mid-ramp.
inline std::vector<double> ramp_positions(const std::vector<double>& phi) {
  if (phi.size() == 1) return {1.0};
  const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
  std::vector<double> t(phi.size(), 0.5);
  const double span = *hi - *lo;
  if (span > 0.0) {
    for (std::size_t i = 0; i < phi.size(); ++i) t[i] = (phi[i] - *lo) / span;
  }
  return t;
}

namespace detail {

// 5x7 glyphs, five column bytes each, bit 0 = top row.
struct Glyph {
  char c;
  std::array<std::uint8_t, 5> cols;
};

inline constexpr Glyph kGlyphs[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}},
    {'-', {0x08, 0x08, 0x08, 0x08, 0x08}}, {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
    {':', {0x00, 0x36, 0x36, 0x00, 0x00}}, {'=', {0x14, 0x14, 0x14, 0x14, 0x14}},
    {'_', {0x40, 0x40, 0x40, 0x40, 0x40}}, {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}},
    {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}}, {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
    {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}}, {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}},
    {'5', {0x27, 0x45, 0x45, 0x45, 0x39}}, {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}},
    {'7', {0x01, 0x71, 0x09, 0x05, 0x03}}, {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
    {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}}, {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}},
    {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}}, {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}},
    {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}}, {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}},
    {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}}, {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}},
    {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}}, {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}},
    {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}}, {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}},
    {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}}, {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}},
    {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}}, {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}},
    {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}}, {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}},
    {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}}, {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
    {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}}, {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}},
    {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}}, {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}},
    {'X', {0x63, 0x14, 0x08, 0x14, 0x63}}, {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
    {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
};

inline const Glyph* FindGlyph(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kGlyphs) {
    if (g.c == up) return &g;
  }
  return nullptr;
}

// Unknown characters render as a blank cell.
inline void DrawText(Image& image, int x0, int y0, std::string_view text,
                     Rgb color) {
  int x = x0;
  for (char c : text) {
    if (const Glyph* g = FindGlyph(c)) {
      for (int col = 0; col < 5; ++col) {
        for (int row = 0; row < 7; ++row) {
          if (!((g->cols[col] >> row) & 1)) continue;
          const int px = x + col;
          const int py = y0 + row;
          if (px >= 0 && py >= 0 && px < image.width() && py < image.height()) {
            image.set(px, py, color);
          }
        }
      }
    }
    x += 6;
  }
}

inline void FillRect(Image& image, int x0, int y0, int x1, int y1, Rgb color) {
  for (int y = std::max(0, y0); y < std::min(image.height(), y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(image.width(), x1); ++x) {
      image.set(x, y, color);
    }
  }
}

}  // namespace detail

// Scene image with every object's mask alpha-blended toward its ramp colour.
// Higher-ranked objects are painted last so they win where masks overlap.
inline Image render_overlay_image(const Scene& scene,
                                  const AttributionResult& result,
                                  const OverlaySpec& spec) {
  if (result.phi.size() != scene.size()) {
    throw Error(ErrorCode::kMismatchedResult,
                "result has " + std::to_string(result.phi.size()) +
                    " values for a scene with " +
                    std::to_string(scene.size()) + " objects");
  }
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "overlay alpha must be in [0, 1]");
  }
  const auto ramp = ColorRamp::Named(spec.colormap);
  if (!ramp) {
    throw Error(ErrorCode::kConfigError,
                "unknown colormap \"" + spec.colormap + "\"");
  }
  const std::vector<double> t = ramp_positions(result.phi);
  std::vector<std::size_t> order(scene.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });

  Image out = scene.image;
  auto blend = [a = spec.alpha](std::uint8_t base, std::uint8_t tint) {
    return static_cast<std::uint8_t>(
        std::lround((1.0 - a) * base + a * tint));
  };
  for (std::size_t id : order) {
    const Rgb tint = ramp->at(t[id]);
    const auto& mask = scene.objects[id].mask;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask.get(i)) continue;
      const Rgb base = scene.image.at(i);
      out.set(i, {blend(base.r, tint.r), blend(base.g, tint.g),
                  blend(base.b, tint.b)});
    }
  }

  if (spec.annotate) {
    for (std::size_t id : order) {
      const auto& obj = scene.objects[id];
      char value[32];
      std::snprintf(value, sizeof(value), "%+.3f", result.phi[id]);
      const std::string text = obj.label + " " + value;
      const int x = obj.bbox.x_min;
      const int y = std::max(0, obj.bbox.y_min - 9);
      detail::FillRect(out, x, y, x + 6 * static_cast<int>(text.size()) + 1,
                       y + 9, {0, 0, 0});
      detail::DrawText(out, x + 1, y + 1, text, {255, 255, 255});
    }
  }
  return out;
}

inline std::vector<std::uint8_t> render_overlay(const Scene& scene,
                                                const AttributionResult& result,
                                                const OverlaySpec& spec) {
  return EncodePng(render_overlay_image(scene, result, spec));
}

}  // namespace objshap
