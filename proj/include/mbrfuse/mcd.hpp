// Copyright 2025 The mbrfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Exact dynamic-time-warping alignment of two cepstral sequences and
// mel-cepstral distortion over a configurable coefficient range. The
// default range 1..25 excludes the 0th (energy) coefficient; alignment
// cost and distortion use the same range unless decoupled by the caller.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mbrfuse/error.hpp"
#include "mbrfuse/features.hpp"

namespace mbrfuse::mcd {

using feat::FeatureSequence;

// Inclusive coefficient index range.
struct CoefRange {
  size_t lo = 1;
  size_t hi = 25;
};

inline constexpr double kMcdConstant = 10.0 / 2.302585092994045684;  // 10/ln 10

struct WarpPath {
  std::vector<std::pair<size_t, size_t>> pairs;
  double total_cost = 0.0;
};

namespace detail {

// Resolves the range for a named cost: euclidean-1-25 pins 1..25,
// euclidean-all spans the full dimension.
inline CoefRange cost_range(std::string_view cost, size_t dim) {
  if (cost == "euclidean-1-25") return {1, 25};
  if (cost == "euclidean-all") return {0, dim - 1};
  fail("unknown DTW cost '", std::string(cost),
       "' (valid: euclidean-1-25, euclidean-all)");
}

inline void check_range(const CoefRange& r, size_t dim, std::string_view op) {
  if (r.lo > r.hi) fail(op, ": empty coefficient range ", r.lo, "..", r.hi);
  if (r.hi >= dim)
    fail(op, ": coefficient range ", r.lo, "..", r.hi,
         " needs dimension >= ", r.hi + 1, " but frames have ", dim);
}

inline double euclidean(std::span<const double> a, std::span<const double> b,
                        const CoefRange& r) {
  double sum = 0.0;
  for (size_t d = r.lo; d <= r.hi; ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

}  // namespace detail

// Minimum-cost monotone unit-step alignment. With band_radius >= 0 a
// Sakoe-Chiba band |i - j| <= max(band_radius, |T_x - T_y|) constrains the
// search (the widening keeps the end cell reachable). Ties in the
// backtrace prefer the diagonal step, then the i-advance, then the
// j-advance.
inline WarpPath dtw_align(const FeatureSequence& x, const FeatureSequence& y,
                          const CoefRange& range, long band_radius = -1) {
  if (x.frames() == 0 || y.frames() == 0)
    fail("dtw_align: empty feature sequence");
  if (x.dim != y.dim)
    fail("dtw_align: dimension mismatch (", x.dim, " vs ", y.dim, ")");
  detail::check_range(range, x.dim, "dtw_align");
  const size_t tx = x.frames(), ty = y.frames();
  const long diff = static_cast<long>(tx > ty ? tx - ty : ty - tx);
  const long band = band_radius < 0 ? -1 : std::max(band_radius, diff);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> dp(tx * ty, kInf);
  std::vector<uint8_t> move(tx * ty, 0);  // 0 = diag, 1 = i-advance, 2 = j-advance
  auto in_band = [&](size_t i, size_t j) {
    return band < 0 ||
           std::labs(static_cast<long>(i) - static_cast<long>(j)) <= band;
  };
  for (size_t i = 0; i < tx; ++i) {
    for (size_t j = 0; j < ty; ++j) {
      if (!in_band(i, j)) continue;
      const double cost = detail::euclidean(x.frame(i), y.frame(j), range);
      if (i == 0 && j == 0) {
        dp[0] = cost;
        continue;
      }
      const double diag = (i > 0 && j > 0) ? dp[(i - 1) * ty + (j - 1)] : kInf;
      const double up = i > 0 ? dp[(i - 1) * ty + j] : kInf;
      const double left = j > 0 ? dp[i * ty + (j - 1)] : kInf;
      const double best = std::min(diag, std::min(up, left));
      if (best == kInf) continue;
      dp[i * ty + j] = best + cost;
      if (diag == best)
        move[i * ty + j] = 0;
      else if (up == best)
        move[i * ty + j] = 1;
      else
        move[i * ty + j] = 2;
    }
  }
  WarpPath path;
  path.total_cost = dp[(tx - 1) * ty + (ty - 1)];
  size_t i = tx - 1, j = ty - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    switch (move[i * ty + j]) {
      case 0:
        --i, --j;
        break;
      case 1:
        --i;
        break;
      default:
        --j;
        break;
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

inline WarpPath dtw_align(const FeatureSequence& x, const FeatureSequence& y,
                          std::string_view cost = "euclidean-all",
                          long band_radius = -1) {
  if (x.dim == 0) fail("dtw_align: empty feature sequence");
  return dtw_align(x, y, detail::cost_range(cost, x.dim), band_radius);
}

// Frame-level mel-cepstral distortion in dB:
//   (10 / ln 10) * sqrt(2 * sum_{d in range} (c_d - c_hat_d)^2)
inline double mcd_frame(std::span<const double> c, std::span<const double> c_hat,
                        const CoefRange& range = {1, 25}) {
  if (c.size() != c_hat.size())
    fail("mcd_frame: dimension mismatch (", c.size(), " vs ", c_hat.size(), ")");
  detail::check_range(range, c.size(), "mcd_frame");
  double sum = 0.0;
  for (size_t d = range.lo; d <= range.hi; ++d) {
    const double diff = c[d] - c_hat[d];
    sum += diff * diff;
  }
  return kMcdConstant * std::sqrt(2.0 * sum);
}

struct McdResult {
  double mcd_db = 0.0;
  WarpPath path;
  CoefRange range;
};

// DTW alignment over `range`, then the mean of mcd_frame over the path's
// frame pairs. The mean is over path pairs, not reference frames.
inline McdResult mcd_score(const FeatureSequence& ref, const FeatureSequence& hyp,
                           const CoefRange& range = {1, 25},
                           long band_radius = -1) {
  McdResult result;
  result.range = range;
  result.path = dtw_align(ref, hyp, range, band_radius);
  double sum = 0.0;
  for (const auto& [i, j] : result.path.pairs)
    sum += mcd_frame(ref.frame(i), hyp.frame(j), range);
  result.mcd_db = sum / static_cast<double>(result.path.pairs.size());
  return result;
}

}  // namespace mbrfuse::mcd
