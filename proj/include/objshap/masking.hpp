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

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "objshap/error.hpp"
#include "objshap/image.hpp"
#include "objshap/scene.hpp"

namespace objshap {

// Set of object ids that stay VISIBLE in a perturbed image.
class Coalition {
 public:
  Coalition() = default;
  Coalition(std::uint64_t bits, std::size_t n) : bits_(bits), n_(n) {}

  static std::uint64_t FullBits(std::size_t n) {
    return n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  }
  static Coalition Full(std::size_t n) { return {FullBits(n), n}; }
  static Coalition Empty(std::size_t n) { return {0, n}; }
  static Coalition Of(std::initializer_list<std::size_t> ids, std::size_t n) {
    std::uint64_t bits = 0;
    for (std::size_t id : ids) bits |= std::uint64_t{1} << id;
    return {bits, n};
  }

  std::uint64_t bits() const { return bits_; }
  std::size_t universe() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  bool contains(std::size_t id) const {
    return id < 64 && ((bits_ >> id) & 1U) != 0;
  }
  bool is_full() const { return bits_ == FullBits(n_); }
  bool valid() const { return n_ <= 64 && (bits_ & ~FullBits(n_)) == 0; }

  Coalition with(std::size_t id) const {
    return {bits_ | (std::uint64_t{1} << id), n_};
  }
  Coalition without(std::size_t id) const {
    return {bits_ & ~(std::uint64_t{1} << id), n_};
  }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < n_; ++i) {
      if (contains(i)) ids.push_back(i);
    }
    return ids;
  }

  // Zero-padded lowercase hex, one digit per four objects.
  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    const std::size_t digits = n_ == 0 ? 1 : (n_ + 3) / 4;
    std::string out(digits, '0');
    std::uint64_t v = bits_;
    for (std::size_t k = 0; k < digits; ++k) {
      out[digits - 1 - k] = kDigits[v & 0xF];
      v >>= 4;
    }
    return out;
  }

  friend bool operator==(const Coalition&, const Coalition&) = default;
  friend auto operator<=>(const Coalition&, const Coalition&) = default;

 private:
  std::uint64_t bits_ = 0;
  std::size_t n_ = 0;
};

enum class MaskingKind { kPrecise, kBBox, kBBOA };

inline std::string_view MaskingKindName(MaskingKind kind) {
  switch (kind) {
    case MaskingKind::kPrecise: return "precise";
    case MaskingKind::kBBox: return "bbox";
    case MaskingKind::kBBOA: return "bboa";
  }
  return "?";
}

inline std::optional<MaskingKind> ParseMaskingKind(std::string_view name) {
  if (name == "precise") return MaskingKind::kPrecise;
  if (name == "bbox") return MaskingKind::kBBox;
  if (name == "bboa") return MaskingKind::kBBOA;
  return std::nullopt;
}

struct FillSpec {
  enum class Mode { kSolidColor, kMeanColor };
  Mode mode = Mode::kSolidColor;
  Rgb color{128, 128, 128};

  static FillSpec Solid(Rgb c) { return {Mode::kSolidColor, c}; }
  static FillSpec Mean() { return {Mode::kMeanColor, {}}; }

  // Per-channel mean of the unperturbed image, rounded to nearest.
  Rgb resolve(const Image& original) const {
    if (mode == Mode::kSolidColor) return color;
    unsigned long long sum[3] = {0, 0, 0};
    const auto bytes = original.bytes();
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
      sum[0] += bytes[i];
      sum[1] += bytes[i + 1];
      sum[2] += bytes[i + 2];
    }
    const unsigned long long n = original.pixel_count();
    auto avg = [n](unsigned long long s) {
      return static_cast<std::uint8_t>((s + n / 2) / n);
    };
    return {avg(sum[0]), avg(sum[1]), avg(sum[2])};
  }

  std::string describe() const {
    if (mode == Mode::kMeanColor) return "mean";
    return "solid(" + std::to_string(color.r) + "," +
           std::to_string(color.g) + "," + std::to_string(color.b) + ")";
  }
};

struct MaskingStrategy {
  MaskingKind kind = MaskingKind::kBBOA;
  FillSpec fill;
};

// Pixels painted when `target` is hidden. `others` are the objects that must
// stay visible; only BBOA consults them.
inline BitMask occlusion_region(const ObjectEntity& target,
                                std::span<const ObjectEntity* const> others,
                                MaskingKind kind) {
  const int width = target.mask.width();
  const int height = target.mask.height();
  switch (kind) {
    case MaskingKind::kPrecise:
      return target.mask;
    case MaskingKind::kBBox: {
      BitMask region(width, height);
      for (int y = target.bbox.y_min; y < target.bbox.y_max; ++y) {
        for (int x = target.bbox.x_min; x < target.bbox.x_max; ++x) {
          region.set(x, y, true);
        }
      }
      return region;
    }
    case MaskingKind::kBBOA: {
      // Box minus every other object's pixels. The target's own pixels are
      // inside the box, so they stay occluded unless another object owns them.
      BitMask region(width, height);
      for (int y = target.bbox.y_min; y < target.bbox.y_max; ++y) {
        for (int x = target.bbox.x_min; x < target.bbox.x_max; ++x) {
          bool claimed = false;
          for (const ObjectEntity* other : others) {
            if (other->mask.get(x, y)) {
              claimed = true;
              break;
            }
          }
          if (!claimed) region.set(x, y, true);
        }
      }
      return region;
    }
  }
  return BitMask(width, height);
}

inline BitMask occlusion_region(const ObjectEntity& target,
                                const std::vector<ObjectEntity>& others,
                                MaskingKind kind) {
  std::vector<const ObjectEntity*> ptrs;
  ptrs.reserve(others.size());
  for (const auto& o : others) ptrs.push_back(&o);
  return occlusion_region(target, ptrs, kind);
}

// Union of the occlusion regions of every hidden object. BBOA reveals only
// objects that are themselves visible in the coalition.
inline BitMask hidden_region(const Scene& scene, const Coalition& coalition,
                             MaskingKind kind) {
  if (coalition.universe() != scene.size() || !coalition.valid()) {
    throw Error(ErrorCode::kInvalidCoalition,
                "coalition " + coalition.hex() + " over " +
                    std::to_string(coalition.universe()) +
                    " objects is not valid for a scene with " +
                    std::to_string(scene.size()) + " objects");
  }
  std::vector<const ObjectEntity*> visible;
  for (const auto& obj : scene.objects) {
    if (coalition.contains(obj.id)) visible.push_back(&obj);
  }
  BitMask region(scene.image.width(), scene.image.height());
  for (const auto& obj : scene.objects) {
    if (coalition.contains(obj.id)) continue;
    const BitMask part = occlusion_region(obj, visible, kind);
    for (std::size_t i = 0; i < region.size(); ++i) {
      if (part.get(i)) region.set(i, true);
    }
  }
  return region;
}

// The perturbed image for a coalition: hidden objects' regions are filled,
// everything else is a bit-exact copy of the original.
inline Image apply_masking(const Scene& scene, const Coalition& coalition,
                           const MaskingStrategy& strategy) {
  const BitMask region = hidden_region(scene, coalition, strategy.kind);
  Image out = scene.image;
  if (coalition.is_full()) return out;
  const Rgb fill = strategy.fill.resolve(scene.image);
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region.get(i)) out.set(i, fill);
  }
  return out;
}

}  // namespace objshap
