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
#include <numeric>
#include <span>
#include <vector>

namespace objshap::stats {

inline double Mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

// Sample standard deviation over sqrt(n); zero for fewer than two values.
inline double StandardError(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = Mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return sd / std::sqrt(static_cast<double>(xs.size()));
}

// 1-based ranks, ties share their average rank. Values closer than `tie_tol`
// to their sorted neighbour count as tied.
inline std::vector<double> AverageRanks(std::span<const double> xs,
                                        double tie_tol = 0.0) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           xs[order[j + 1]] - xs[order[j]] <= tie_tol) {
      ++j;
    }
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Both constant -> 1, exactly one constant -> 0.
inline double Pearson(std::span<const double> a, std::span<const double> b) {
  const double ma = Mean(a);
  const double mb = Mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  constexpr double kFlat = 1e-24;
  if (saa <= kFlat && sbb <= kFlat) return 1.0;
  if (saa <= kFlat || sbb <= kFlat) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline double Spearman(std::span<const double> a, std::span<const double> b,
                       double tie_tol = 0.0) {
  const auto ra = AverageRanks(a, tie_tol);
  const auto rb = AverageRanks(b, tie_tol);
  return Pearson(ra, rb);
}

}  // namespace objshap::stats
