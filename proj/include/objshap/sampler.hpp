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
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "objshap/error.hpp"
#include "objshap/masking.hpp"

namespace objshap {

inline constexpr std::size_t kDefaultExactThreshold = 12;

enum class SamplingMode { kExact, kFirstOrder, kFirstOrderPlusMC };

inline std::string_view SamplingModeName(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::kExact: return "exact";
    case SamplingMode::kFirstOrder: return "first-order";
    case SamplingMode::kFirstOrderPlusMC: return "mc";
  }
  return "?";
}

inline std::optional<SamplingMode> ParseSamplingMode(std::string_view name) {
  if (name == "exact") return SamplingMode::kExact;
  if (name == "first-order") return SamplingMode::kFirstOrder;
  if (name == "mc") return SamplingMode::kFirstOrderPlusMC;
  return std::nullopt;
}

struct SamplingPlan {
  SamplingMode mode = SamplingMode::kFirstOrderPlusMC;
  // Extra Monte Carlo coalitions; unset means 2 * N.
  std::optional<std::size_t> budget;
  std::uint64_t seed = 0;
  std::size_t exact_threshold = kDefaultExactThreshold;

  std::size_t budget_for(std::size_t n) const { return budget.value_or(2 * n); }
};

// Leave-one-out coalitions ordered by the omitted id.
inline std::vector<Coalition> first_order_coalitions(std::size_t n) {
  std::vector<Coalition> out;
  out.reserve(n);
  const Coalition full = Coalition::Full(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(full.without(i));
  return out;
}

// All 2^n coalitions in ascending bitset order.
inline std::vector<Coalition> powerset_coalitions(
    std::size_t n, std::size_t exact_threshold = kDefaultExactThreshold) {
  if (n > exact_threshold) {
    throw Error(ErrorCode::kTooManyObjects,
                std::to_string(n) + " objects exceed exact_threshold " +
                    std::to_string(exact_threshold));
  }
  std::vector<Coalition> out;
  const std::uint64_t count = std::uint64_t{1} << n;
  out.reserve(count);
  for (std::uint64_t bits = 0; bits < count; ++bits) out.emplace_back(bits, n);
  return out;
}

// Up to `budget` distinct coalitions, each object kept with probability 1/2.
// The full coalition and anything in `exclude` are never returned. When fewer
// candidates remain than the budget, all of them are returned in bitset order.
inline std::vector<Coalition> monte_carlo_coalitions(
    std::size_t n, std::size_t budget, std::uint64_t seed,
    const std::vector<Coalition>& exclude = {}) {
  std::vector<Coalition> out;
  if (budget == 0 || n == 0) return out;
  const std::uint64_t full = Coalition::FullBits(n);
  std::set<std::uint64_t> taken{full};
  for (const auto& c : exclude) {
    if (c.universe() == n) taken.insert(c.bits());
  }

  // Remaining candidate count; saturates for n >= 63.
  const bool huge = n >= 63;
  const std::uint64_t space = huge ? 0 : (std::uint64_t{1} << n);
  const std::uint64_t remaining = huge ? ~std::uint64_t{0} : space - taken.size();

  if (!huge && remaining <= budget) {
    for (std::uint64_t bits = 0; bits < space; ++bits) {
      if (!taken.contains(bits)) out.emplace_back(bits, n);
    }
    return out;
  }

  std::mt19937_64 rng(seed);
  if (!huge && remaining < space / 4) {
    // Dense exclusion: draw without replacement from the explicit remainder.
    std::vector<std::uint64_t> pool;
    pool.reserve(remaining);
    for (std::uint64_t bits = 0; bits < space; ++bits) {
      if (!taken.contains(bits)) pool.push_back(bits);
    }
    for (std::size_t k = 0; k < budget; ++k) {
      const std::uint64_t j = k + rng() % (pool.size() - k);
      std::swap(pool[k], pool[j]);
      out.emplace_back(pool[k], n);
    }
    return out;
  }

  while (out.size() < budget) {
    const std::uint64_t bits = rng() & full;
    if (taken.insert(bits).second) out.emplace_back(bits, n);
  }
  return out;
}

// Every coalition to value for an n-object scene, always including the full
// coalition. Exact mode throws TooManyObjects above the threshold.
inline std::vector<Coalition> build_plan(std::size_t n,
                                         const SamplingPlan& plan) {
  if (plan.mode == SamplingMode::kExact) {
    return powerset_coalitions(n, plan.exact_threshold);
  }
  std::vector<Coalition> out{Coalition::Full(n)};
  const auto first = first_order_coalitions(n);
  out.insert(out.end(), first.begin(), first.end());
  if (plan.mode == SamplingMode::kFirstOrderPlusMC) {
    const auto extra =
        monte_carlo_coalitions(n, plan.budget_for(n), plan.seed, out);
    out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

}  // namespace objshap
