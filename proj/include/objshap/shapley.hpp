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
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "objshap/error.hpp"
#include "objshap/masking.hpp"

namespace objshap {

// Coalition values v(S'). The full coalition's value is the reference.
class ValueTable {
 public:
  explicit ValueTable(std::size_t n) : n_(n) {
    if (n > kMaxObjects) {
      throw Error(ErrorCode::kTooManyObjects, "value table too wide");
    }
  }

  std::size_t n() const { return n_; }
  std::size_t size() const { return entries_.size(); }

  void set(const Coalition& c, double value) {
    if (c.universe() != n_ || !c.valid()) {
      throw Error(ErrorCode::kInvalidCoalition,
                  "coalition " + c.hex() + " is not valid for n=" +
                      std::to_string(n_));
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kPrecondition,
                  "non-finite value for coalition " + c.hex());
    }
    entries_[c.bits()] = value;
  }
  void set(std::uint64_t bits, double value) { set(Coalition(bits, n_), value); }

  bool contains(std::uint64_t bits) const { return entries_.contains(bits); }
  double at(std::uint64_t bits) const {
    const auto it = entries_.find(bits);
    if (it == entries_.end()) {
      throw Error(ErrorCode::kIncompleteTable,
                  "no value for coalition " + Coalition(bits, n_).hex());
    }
    return it->second;
  }
  double reference_value() const { return at(Coalition::FullBits(n_)); }

  bool is_complete() const {
    return n_ < 63 && entries_.size() == (std::uint64_t{1} << n_);
  }

  const std::map<std::uint64_t, double>& entries() const { return entries_; }

 private:
  std::size_t n_;
  std::map<std::uint64_t, double> entries_;
};

// Exact Shapley values from a table holding all 2^n coalitions.
inline std::vector<double> exact_shapley(const ValueTable& table) {
  const std::size_t n = table.n();
  if (!table.is_complete()) {
    throw Error(ErrorCode::kIncompleteTable,
                "exact Shapley needs all " +
                    std::to_string(std::uint64_t{1} << std::min<std::size_t>(n, 62)) +
                    " coalitions, table has " + std::to_string(table.size()));
  }
  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double w = 1.0 / static_cast<double>(n);
    // 1 / (n * C(n-1, s))
    double binom = 1.0;
    for (std::size_t k = 1; k <= s; ++k) {
      binom = binom * static_cast<double>(n - 1 - s + k) / static_cast<double>(k);
    }
    weight[s] = w / binom;
  }

  std::vector<double> values(std::uint64_t{1} << n);
  for (const auto& [bits, v] : table.entries()) values[bits] = v;

  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    // Kahan-compensated sum keeps efficiency tight for n up to the threshold.
    double sum = 0.0;
    double comp = 0.0;
    for (std::uint64_t s = 0; s < values.size(); ++s) {
      if (s & bit) continue;
      const double term =
          weight[static_cast<std::size_t>(std::popcount(s))] *
          (values[s | bit] - values[s]);
      const double y = term - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    phi[i] = sum;
  }
  return phi;
}

// Mean of values with object i present minus mean with i absent.
inline std::vector<double> estimate_shapley(const ValueTable& table) {
  const std::size_t n = table.n();
  std::vector<double> in_sum(n, 0.0), out_sum(n, 0.0);
  std::vector<std::size_t> in_count(n, 0), out_count(n, 0);
  for (const auto& [bits, v] : table.entries()) {
    for (std::size_t i = 0; i < n; ++i) {
      if ((bits >> i) & 1U) {
        in_sum[i] += v;
        ++in_count[i];
      } else {
        out_sum[i] += v;
        ++out_count[i];
      }
    }
  }
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (in_count[i] == 0 || out_count[i] == 0) {
      throw Error(ErrorCode::kUncoveredObject,
                  "object " + std::to_string(i) + " is never " +
                      (in_count[i] == 0 ? "included" : "excluded"));
    }
    phi[i] = in_sum[i] / static_cast<double>(in_count[i]) -
             out_sum[i] / static_cast<double>(out_count[i]);
  }
  return phi;
}

// Ids by descending phi; ties go to the lower id.
inline std::vector<std::size_t> rank_objects(const std::vector<double>& phi) {
  std::vector<std::size_t> ids(phi.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return phi[a] > phi[b];
  });
  return ids;
}

enum class EstimatorKind { kExact, kMeanDiff };

inline std::string_view EstimatorName(EstimatorKind kind) {
  return kind == EstimatorKind::kExact ? "exact" : "mean_diff";
}

struct AttributionResult {
  std::vector<double> phi;
  std::vector<std::size_t> ranking;
  EstimatorKind estimator = EstimatorKind::kMeanDiff;
  std::size_t samples_used = 0;
  double elapsed_s = 0.0;
  std::string config_fingerprint;
};

// Picks the exact formula whenever the table covers the whole powerset.
inline AttributionResult estimate(const ValueTable& table) {
  AttributionResult result;
  if (table.is_complete()) {
    result.phi = exact_shapley(table);
    result.estimator = EstimatorKind::kExact;
  } else {
    result.phi = estimate_shapley(table);
    result.estimator = EstimatorKind::kMeanDiff;
  }
  result.ranking = rank_objects(result.phi);
  result.samples_used = table.size();
  return result;
}

}  // namespace objshap
