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
// Minimum Bayes Risk selection over per-segment hypothesis pools. The
// merged pool serves as both candidate set and pseudo-reference set; the
// N x N utility matrix is computed in full. The kernel interns n-grams per
// segment and matches them by sorted-id merge, then feeds the same
// count-to-score formulas as the metrics module, so matrix entries are
// bit-identical to bleu_sentence / chrf_sentence on the same texts.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mbrfuse/error.hpp"
#include "mbrfuse/metrics.hpp"
#include "mbrfuse/parallel.hpp"
#include "mbrfuse/textnorm.hpp"

namespace mbrfuse::mbr {

using textnorm::NormalizedText;

struct Hypothesis {
  NormalizedText text;
  std::string system;  // e.g. "cascaded", "e2e"
  size_t rank = 0;     // 0-based position within its system's list
};

struct HypothesisPool {
  std::string segment_id;
  std::vector<Hypothesis> members;
  std::vector<double> weights;  // same length as members, sum > 0
};

enum class Utility { kBleu, kChrf };

inline Utility utility_from_name(std::string_view name) {
  if (name == "bleu") return Utility::kBleu;
  if (name == "chrf") return Utility::kChrf;
  fail("unknown utility '", std::string(name), "' (valid: bleu, chrf)");
}

inline std::string_view utility_name(Utility u) {
  return u == Utility::kBleu ? "bleu" : "chrf";
}

struct UtilityMatrix {
  size_t n = 0;
  std::vector<double> values;  // row-major, values[i*n + j]
  std::string utility;

  double at(size_t i, size_t j) const { return values[i * n + j]; }
};

inline void validate_pool(const HypothesisPool& pool) {
  if (pool.members.empty())
    fail("pool for segment '", pool.segment_id, "' has no members");
  if (pool.weights.size() != pool.members.size())
    fail("pool for segment '", pool.segment_id, "' has ", pool.members.size(),
         " members but ", pool.weights.size(), " weights");
  double sum = 0.0;
  for (double w : pool.weights) {
    if (w < 0.0)
      fail("pool for segment '", pool.segment_id, "' has a negative weight");
    sum += w;
  }
  if (sum <= 0.0)
    fail("pool for segment '", pool.segment_id, "' has zero total weight");
}

// Concatenates two pools for the same segment, first pool's members first,
// preserving per-system rank order. With the default weights every member
// ends up uniform at 1/N; otherwise every member of `a` carries weight_a
// and every member of `b` weight_b, normalized so the total is 1.
inline HypothesisPool merge_pools(const HypothesisPool& a,
                                  const HypothesisPool& b, double weight_a = 1.0,
                                  double weight_b = 1.0) {
  if (a.segment_id != b.segment_id)
    fail("cannot merge pools for different segments ('", a.segment_id,
         "' vs '", b.segment_id, "')");
  if (a.members.empty()) fail("pool_a for segment '", a.segment_id, "' is empty");
  if (b.members.empty()) fail("pool_b for segment '", b.segment_id, "' is empty");
  if (weight_a < 0.0 || weight_b < 0.0)
    fail("system weights must be non-negative");
  std::set<std::string> systems_a;
  for (const auto& h : a.members) systems_a.insert(h.system);
  for (const auto& h : b.members)
    if (systems_a.count(h.system) != 0)
      fail("system '", h.system, "' appears in both pools for segment '",
           a.segment_id, "'");
  const double denom = weight_a * static_cast<double>(a.members.size()) +
                       weight_b * static_cast<double>(b.members.size());
  if (denom <= 0.0) fail("system weights sum to zero");
  HypothesisPool merged;
  merged.segment_id = a.segment_id;
  merged.members.reserve(a.members.size() + b.members.size());
  for (const auto& h : a.members) {
    merged.members.push_back(h);
    merged.weights.push_back(weight_a / denom);
  }
  for (const auto& h : b.members) {
    merged.members.push_back(h);
    merged.weights.push_back(weight_b / denom);
  }
  return merged;
}

namespace detail {

// Sorted (gram id, count) lists per member and order, built by hierarchical
// pair interning: an order-n gram id is the interned pair of its order-(n-1)
// prefix id and the final token id. Ids are segment-local and exact.
struct GramTable {
  size_t orders = 0;
  std::vector<int64_t> lengths;  // token count per member
  // counts[member][order-1] = sorted (id, count)
  std::vector<std::vector<std::vector<std::pair<int32_t, int32_t>>>> counts;

  GramTable(const std::vector<std::vector<int32_t>>& token_ids, size_t max_order)
      : orders(max_order) {
    const size_t n_members = token_ids.size();
    lengths.resize(n_members);
    counts.assign(n_members, {});
    for (size_t m = 0; m < n_members; ++m) {
      lengths[m] = static_cast<int64_t>(token_ids[m].size());
      counts[m].resize(orders);
    }
    std::vector<std::vector<int32_t>> prev(n_members), cur(n_members);
    for (size_t order = 1; order <= orders; ++order) {
      std::unordered_map<uint64_t, int32_t> interner;
      for (size_t m = 0; m < n_members; ++m) {
        const auto& toks = token_ids[m];
        auto& ids = cur[m];
        ids.clear();
        if (toks.size() >= order) {
          ids.resize(toks.size() - order + 1);
          for (size_t p = 0; p + order <= toks.size(); ++p) {
            if (order == 1) {
              ids[p] = toks[p];
            } else {
              const uint64_t key =
                  (static_cast<uint64_t>(static_cast<uint32_t>(prev[m][p]))
                   << 32) |
                  static_cast<uint32_t>(toks[p + order - 1]);
              const auto [it, inserted] =
                  interner.emplace(key, static_cast<int32_t>(interner.size()));
              ids[p] = it->second;
            }
          }
        }
        auto sorted = ids;
        std::sort(sorted.begin(), sorted.end());
        auto& rle = counts[m][order - 1];
        for (size_t p = 0; p < sorted.size();) {
          size_t q = p;
          while (q < sorted.size() && sorted[q] == sorted[p]) ++q;
          rle.emplace_back(sorted[p], static_cast<int32_t>(q - p));
          p = q;
        }
      }
      prev.swap(cur);
    }
  }

  // Sum over shared gram ids of min(count_a, count_b).
  static int64_t clipped_matches(
      const std::vector<std::pair<int32_t, int32_t>>& a,
      const std::vector<std::pair<int32_t, int32_t>>& b) {
    int64_t matched = 0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i].first < b[j].first) {
        ++i;
      } else if (b[j].first < a[i].first) {
        ++j;
      } else {
        matched += std::min(a[i].second, b[j].second);
        ++i, ++j;
      }
    }
    return matched;
  }
};

inline GramTable bleu_gram_table(const HypothesisPool& pool, int max_n) {
  std::unordered_map<std::string, int32_t> vocab;
  std::vector<std::vector<int32_t>> ids(pool.members.size());
  for (size_t m = 0; m < pool.members.size(); ++m) {
    for (auto& w : metrics::split_words(pool.members[m].text.text)) {
      const auto [it, inserted] =
          vocab.emplace(std::move(w), static_cast<int32_t>(vocab.size()));
      ids[m].push_back(it->second);
    }
  }
  return GramTable(ids, static_cast<size_t>(max_n));
}

inline GramTable chrf_gram_table(const HypothesisPool& pool, int n_max) {
  std::vector<std::vector<int32_t>> ids(pool.members.size());
  for (size_t m = 0; m < pool.members.size(); ++m)
    for (char32_t cp : metrics::chars_no_space(pool.members[m].text.text))
      ids[m].push_back(static_cast<int32_t>(cp));
  return GramTable(ids, static_cast<size_t>(n_max));
}

inline double pair_bleu(const GramTable& t, size_t cand, size_t pseudo_ref,
                        int max_n) {
  metrics::BleuCounts c(max_n);
  c.hyp_len = t.lengths[cand];
  c.ref_len = t.lengths[pseudo_ref];
  for (int n = 1; n <= max_n; ++n) {
    c.totals[n - 1] = c.hyp_len >= n ? c.hyp_len - n + 1 : 0;
    c.matched[n - 1] = GramTable::clipped_matches(t.counts[cand][n - 1],
                                                  t.counts[pseudo_ref][n - 1]);
  }
  return metrics::bleu_from_counts(c, metrics::BleuSmoothing::kAdd1).score;
}

inline double pair_chrf(const GramTable& t, size_t cand, size_t pseudo_ref,
                        int n_max, double beta) {
  metrics::ChrfCounts c(n_max);
  for (int n = 1; n <= n_max; ++n) {
    c.hyp_totals[n - 1] =
        t.lengths[cand] >= n ? t.lengths[cand] - n + 1 : 0;
    c.ref_totals[n - 1] =
        t.lengths[pseudo_ref] >= n ? t.lengths[pseudo_ref] - n + 1 : 0;
    c.matched[n - 1] = GramTable::clipped_matches(t.counts[cand][n - 1],
                                                  t.counts[pseudo_ref][n - 1]);
  }
  return metrics::chrf_from_counts(c, beta).score;
}

}  // namespace detail

// values[i][j] = utility(candidate = members[i], pseudo-reference =
// members[j]). BLEU is asymmetric in candidate/reference, so the matrix is
// not symmetric in general.
inline UtilityMatrix utility_matrix(const HypothesisPool& pool, Utility utility) {
  validate_pool(pool);
  const size_t n = pool.members.size();
  UtilityMatrix m;
  m.n = n;
  m.utility = std::string(utility_name(utility));
  m.values.resize(n * n);
  if (utility == Utility::kBleu) {
    const int max_n = 4;
    const detail::GramTable table = detail::bleu_gram_table(pool, max_n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        m.values[i * n + j] = detail::pair_bleu(table, i, j, max_n);
  } else {
    const int n_max = 6;
    const double beta = 2.0;
    const detail::GramTable table = detail::chrf_gram_table(pool, n_max);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        m.values[i * n + j] = detail::pair_chrf(table, i, j, n_max, beta);
  }
  return m;
}

// e[i] = sum_j w_j * values[i][j] / sum_j w_j. The self term j == i is a
// pseudo-reference like any other; exclude_self removes it from both the
// numerator and the weight mass. A singleton pool with exclude_self has no
// pseudo-references at all and scores 0.
inline std::vector<double> expected_utility(const UtilityMatrix& matrix,
                                            std::span<const double> weights,
                                            bool exclude_self = false) {
  const size_t n = matrix.n;
  if (weights.size() != n)
    fail("expected_utility: ", n, " hypotheses but ", weights.size(),
         " weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) fail("expected_utility: negative weight");
    total += w;
  }
  if (total <= 0.0) fail("expected_utility: weights sum to zero");
  std::vector<double> e(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    double denom = total;
    for (size_t j = 0; j < n; ++j) {
      if (exclude_self && j == i) continue;
      sum += weights[j] * matrix.values[i * n + j];
    }
    if (exclude_self) denom -= weights[i];
    e[i] = denom > 0.0 ? sum / denom : 0.0;
  }
  return e;
}

inline size_t argmax_lowest_index(std::span<const double> values) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

struct Selection {
  size_t index = 0;
  Hypothesis hypothesis;
  std::vector<double> expected;
};

// Maximizes expected utility over the pool; ties go to the lowest pool
// index, which the pool's cascaded-before-e2e ordering makes deterministic.
inline Selection mbr_select(const HypothesisPool& pool, Utility utility,
                            bool exclude_self = false) {
  const UtilityMatrix m = utility_matrix(pool, utility);
  Selection sel;
  sel.expected = expected_utility(m, pool.weights, exclude_self);
  sel.index = argmax_lowest_index(sel.expected);
  sel.hypothesis = pool.members[sel.index];
  return sel;
}

struct SegmentSelection {
  std::string segment_id;
  size_t index = 0;
  Hypothesis hypothesis;
  std::vector<double> expected;
};

struct CombineOptions {
  Utility utility = Utility::kBleu;
  bool exclude_self = false;
  double weight_a = 1.0;
  double weight_b = 1.0;
  unsigned threads = 1;  // 0 = one per hardware core
};

namespace detail {

// Ascending segment order: numeric when every id is a pure digit string,
// lexicographic otherwise.
inline std::vector<std::string> sorted_segment_ids(
    const std::vector<HypothesisPool>& pools) {
  std::vector<std::string> ids;
  ids.reserve(pools.size());
  bool numeric = true;
  for (const auto& p : pools) {
    ids.push_back(p.segment_id);
    if (p.segment_id.empty() ||
        p.segment_id.find_first_not_of("0123456789") != std::string::npos)
      numeric = false;
  }
  if (numeric) {
    std::sort(ids.begin(), ids.end(), [](const std::string& a,
                                         const std::string& b) {
      const auto strip = [](const std::string& s) {
        const size_t i = s.find_first_not_of('0');
        return i == std::string::npos ? std::string_view("0")
                                      : std::string_view(s).substr(i);
      };
      const auto sa = strip(a), sb = strip(b);
      if (sa.size() != sb.size()) return sa.size() < sb.size();
      if (sa != sb) return sa < sb;
      return a < b;
    });
  } else {
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

}  // namespace detail

// Per segment: merge_pools -> utility_matrix -> mbr_select. Both inputs
// must cover exactly the same segment-id set. Output follows ascending
// segment order and is bit-identical at any thread count.
inline std::vector<SegmentSelection> mbr_combine_corpus(
    const std::vector<HypothesisPool>& pools_a,
    const std::vector<HypothesisPool>& pools_b,
    const CombineOptions& options = {}) {
  std::map<std::string, const HypothesisPool*> by_id_a, by_id_b;
  for (const auto& p : pools_a) {
    if (!by_id_a.emplace(p.segment_id, &p).second)
      fail("duplicate segment '", p.segment_id, "' in pool_a");
  }
  for (const auto& p : pools_b) {
    if (!by_id_b.emplace(p.segment_id, &p).second)
      fail("duplicate segment '", p.segment_id, "' in pool_b");
  }
  std::vector<std::string> missing_in_b, missing_in_a;
  for (const auto& [id, _] : by_id_a)
    if (by_id_b.find(id) == by_id_b.end()) missing_in_b.push_back(id);
  for (const auto& [id, _] : by_id_b)
    if (by_id_a.find(id) == by_id_a.end()) missing_in_a.push_back(id);
  if (!missing_in_a.empty() || !missing_in_b.empty()) {
    std::string msg = "segment-id sets differ:";
    for (const auto& id : missing_in_b) msg += " '" + id + "' missing in pool_b;";
    for (const auto& id : missing_in_a) msg += " '" + id + "' missing in pool_a;";
    throw Error(msg);
  }
  const std::vector<std::string> order = detail::sorted_segment_ids(pools_a);
  std::vector<SegmentSelection> out(order.size());
  par::parallel_for(order.size(), options.threads, [&](size_t k) {
    const std::string& id = order[k];
    const HypothesisPool merged = merge_pools(
        *by_id_a.at(id), *by_id_b.at(id), options.weight_a, options.weight_b);
    Selection sel = mbr_select(merged, options.utility, options.exclude_self);
    out[k] = SegmentSelection{id, sel.index, std::move(sel.hypothesis),
                              std::move(sel.expected)};
  });
  return out;
}

}  // namespace mbrfuse::mbr
