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
// Manifest filtering, deterministic subsampling, and feature-level
// augmentation. Filters are pure; every seeded operation reproduces the
// same bytes for the same seed.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbrfuse/error.hpp"
#include "mbrfuse/features.hpp"
#include "mbrfuse/metrics.hpp"
#include "mbrfuse/rng.hpp"

namespace mbrfuse::datakit {

using feat::FeatureSequence;

struct SampleRecord {
  std::string id;
  std::optional<double> duration_secs;
  std::string source_text;
  std::optional<std::string> target_text;
  std::optional<std::string> audio_ref;
};

// kept + sum(dropped_by_rule) == input_count always. `flagged` counts are
// informational (the records stay kept) and sit outside that balance.
struct FilterReport {
  size_t input_count = 0;
  size_t kept = 0;
  std::map<std::string, size_t> dropped_by_rule;
  std::map<std::string, size_t> flagged;
};

struct FilterResult {
  std::vector<SampleRecord> records;
  FilterReport report;
};

// Keeps records with duration_secs <= max_secs; "exceeding" is a strict
// comparison, so a record at exactly max_secs stays. Records without a
// duration are kept and flagged under "no-duration".
inline FilterResult filter_duration(std::span<const SampleRecord> records,
                                    double max_secs = 15.0) {
  if (!(max_secs > 0.0)) fail("filter_duration: max_secs must be positive");
  FilterResult result;
  result.report.input_count = records.size();
  for (const auto& r : records) {
    if (!r.duration_secs) {
      ++result.report.flagged["no-duration"];
    } else if (*r.duration_secs > max_secs) {
      ++result.report.dropped_by_rule["duration"];
      continue;
    }
    ++result.report.kept;
    result.records.push_back(r);
  }
  return result;
}

// Audio-to-text length ratio: duration_secs / source token count. Keeps
// records with ratio in [min_ratio, max_ratio]; records without a duration
// or without source tokens are dropped under "undefined-ratio".
inline FilterResult filter_length_ratio(std::span<const SampleRecord> records,
                                        double min_ratio, double max_ratio) {
  if (!(min_ratio > 0.0) || !(min_ratio < max_ratio))
    fail("filter_length_ratio: need 0 < min_ratio < max_ratio, got ",
         min_ratio, " and ", max_ratio);
  FilterResult result;
  result.report.input_count = records.size();
  for (const auto& r : records) {
    const size_t tokens = metrics::split_words(r.source_text).size();
    if (!r.duration_secs || tokens == 0) {
      ++result.report.dropped_by_rule["undefined-ratio"];
      continue;
    }
    const double ratio = *r.duration_secs / static_cast<double>(tokens);
    if (ratio < min_ratio || ratio > max_ratio) {
      ++result.report.dropped_by_rule["length-ratio"];
      continue;
    }
    ++result.report.kept;
    result.records.push_back(r);
  }
  return result;
}

// Uniform sample without replacement: one seeded Fisher-Yates shuffle of
// the index range, take the first target_count indices, emit them in input
// order. Prefix sampling makes schedules nested: with one seed, the 23k
// subset of a 45k manifest contains the 12k subset, and so on.
inline std::vector<SampleRecord> subsample(std::span<const SampleRecord> records,
                                           size_t target_count, uint64_t seed) {
  if (target_count == 0) fail("subsample: target_count must be positive");
  if (target_count > records.size())
    fail("subsample: target_count ", target_count, " exceeds input size ",
         records.size());
  std::vector<size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  rng::Engine engine(seed);
  for (size_t i = order.size() - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(engine.next_below(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<size_t> chosen(order.begin(),
                             order.begin() + static_cast<long>(target_count));
  std::sort(chosen.begin(), chosen.end());
  std::vector<SampleRecord> out;
  out.reserve(target_count);
  for (size_t idx : chosen) out.push_back(records[idx]);
  return out;
}

// Adds an independent N(0, sigma^2) draw to every coefficient, row-major
// draw order. sigma == 0 returns the input unchanged.
inline FeatureSequence add_gaussian_noise(const FeatureSequence& feats,
                                          double sigma, uint64_t seed) {
  if (sigma < 0.0) fail("add_gaussian_noise: sigma must be >= 0");
  FeatureSequence out = feats;
  if (sigma == 0.0) return out;
  rng::Engine engine(seed);
  for (double& v : out.data) v += sigma * engine.next_normal();
  return out;
}

// SpecAugment-style masking: n_time spans of frames (width uniform in
// [0, time_max_width], clipped to the sequence) zeroed across all
// coefficients, then n_freq coefficient bands likewise zeroed across all
// frames. Draw order: per mask, width then start.
inline FeatureSequence spec_mask(const FeatureSequence& feats,
                                 size_t time_max_width, size_t freq_max_width,
                                 size_t n_time, size_t n_freq, uint64_t seed) {
  FeatureSequence out = feats;
  const size_t t_total = out.frames();
  rng::Engine engine(seed);
  for (size_t k = 0; k < n_time; ++k) {
    const size_t width =
        std::min<size_t>(engine.next_below(time_max_width + 1), t_total);
    const size_t start = static_cast<size_t>(engine.next_below(t_total - width + 1));
    for (size_t t = start; t < start + width; ++t)
      for (size_t d = 0; d < out.dim; ++d) out.at(t, d) = 0.0;
  }
  for (size_t k = 0; k < n_freq; ++k) {
    const size_t width =
        std::min<size_t>(engine.next_below(freq_max_width + 1), out.dim);
    const size_t start = static_cast<size_t>(engine.next_below(out.dim - width + 1));
    for (size_t t = 0; t < t_total; ++t)
      for (size_t d = start; d < start + width; ++d) out.at(t, d) = 0.0;
  }
  return out;
}

}  // namespace mbrfuse::datakit
