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
// Scoring functions: edit-distance based WER/CER and n-gram based
// BLEU/chrF, at corpus and sentence level. Corpus scores pool counts over
// segments; they never average per-segment scores.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mbrfuse/error.hpp"
#include "mbrfuse/textnorm.hpp"
#include "mbrfuse/unicode.hpp"

namespace mbrfuse::metrics {

using textnorm::NormalizedText;

// ---------------------------------------------------------------------------
// Tokenization. Scoring assumes already-normalized text, so words are
// whitespace-separated and characters are code points.

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string token;
  size_t pos = 0;
  while (pos < s.size()) {
    const size_t start = pos;
    const char32_t cp = uni::decode_one(s, pos);
    if (uni::is_space(cp)) {
      if (!token.empty()) out.push_back(std::move(token)), token.clear();
    } else {
      token.append(s.substr(start, pos - start));
    }
  }
  if (!token.empty()) out.push_back(std::move(token));
  return out;
}

// Character tokens for CER: code points, with whitespace runs collapsed to
// a single space token and leading/trailing whitespace dropped.
inline std::vector<char32_t> char_tokens(std::string_view s) {
  std::vector<char32_t> out;
  bool pending_space = false;
  size_t pos = 0;
  while (pos < s.size()) {
    const char32_t cp = uni::decode_one(s, pos);
    if (uni::is_space(cp)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(U' ');
      pending_space = false;
      out.push_back(cp);
    }
  }
  return out;
}

// Code points with all whitespace removed (chrF convention).
inline std::u32string chars_no_space(std::string_view s) {
  std::u32string out;
  size_t pos = 0;
  while (pos < s.size()) {
    const char32_t cp = uni::decode_one(s, pos);
    if (!uni::is_space(cp)) out.push_back(cp);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edit distance with S/D/I decomposition.

struct EditAlignment {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t distance = 0;
  int64_t ref_len = 0;
  int64_t hyp_len = 0;
};

// Levenshtein distance with unit costs. The decomposition comes from one
// optimal edit script; when step costs tie the backtrace prefers
// substitution, then deletion, then insertion.
template <typename Token>
EditAlignment edit_distance(std::span<const Token> ref,
                            std::span<const Token> hyp) {
  const size_t r = ref.size(), h = hyp.size();
  std::vector<int32_t> dp((r + 1) * (h + 1));
  auto at = [&](size_t i, size_t j) -> int32_t& { return dp[i * (h + 1) + j]; };
  for (size_t i = 0; i <= r; ++i) at(i, 0) = static_cast<int32_t>(i);
  for (size_t j = 0; j <= h; ++j) at(0, j) = static_cast<int32_t>(j);
  for (size_t i = 1; i <= r; ++i) {
    for (size_t j = 1; j <= h; ++j) {
      const int32_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int32_t del = at(i - 1, j) + 1;
      const int32_t ins = at(i, j - 1) + 1;
      at(i, j) = std::min(diag, std::min(del, ins));
    }
  }
  EditAlignment a;
  a.ref_len = static_cast<int64_t>(r);
  a.hyp_len = static_cast<int64_t>(h);
  a.distance = at(r, h);
  size_t i = r, j = h;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (!(ref[i - 1] == hyp[j - 1])) ++a.substitutions;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++a.deletions;
      --i;
    } else {
      ++a.insertions;
      --j;
    }
  }
  return a;
}

template <typename Token>
EditAlignment edit_distance(const std::vector<Token>& ref,
                            const std::vector<Token>& hyp) {
  return edit_distance(std::span<const Token>(ref), std::span<const Token>(hyp));
}

// ---------------------------------------------------------------------------
// Reports.

struct EditTotals {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t distance = 0;
  int64_t ref_len = 0;
};

struct BleuBreakdown {
  std::vector<double> precisions;        // unsmoothed matched/total per order
  std::vector<int64_t> matched, totals;  // pooled counts per order
  double brevity_penalty = 1.0;
  int64_t hyp_len = 0;
  int64_t ref_len = 0;
  double score = 0.0;
};

struct ChrfBreakdown {
  int n_max = 6;
  double beta = 2.0;
  double precision = 0.0;
  double recall = 0.0;
  double score = 0.0;
};

struct ScoreReport {
  std::string metric;
  double corpus_score = 0.0;
  std::vector<double> per_segment;
  std::string profile;
  size_t segment_count = 0;
  std::optional<EditTotals> edit;
  std::optional<BleuBreakdown> bleu;
  std::optional<ChrfBreakdown> chrf;
};

namespace detail {

inline std::string shared_profile(std::span<const NormalizedText> refs,
                                  std::span<const NormalizedText> hyps,
                                  std::string_view op) {
  if (refs.size() != hyps.size())
    fail(op, ": reference and hypothesis counts differ (", refs.size(), " vs ",
         hyps.size(), ")");
  if (refs.empty()) fail(op, ": empty corpus");
  const std::string& p = refs.front().profile;
  for (const auto& t : refs)
    if (t.profile != p) fail(op, ": mixed normalization profiles in references");
  for (const auto& t : hyps)
    if (t.profile != p)
      fail(op, ": hypothesis profile '", t.profile,
           "' differs from reference profile '", p, "'");
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// WER / CER.

namespace detail {

template <typename Tokenize>
ScoreReport edit_rate(std::span<const NormalizedText> refs,
                      std::span<const NormalizedText> hyps,
                      std::string_view metric, Tokenize tokenize) {
  ScoreReport report;
  report.metric = metric;
  report.profile = shared_profile(refs, hyps, metric);
  report.segment_count = refs.size();
  EditTotals totals;
  for (size_t k = 0; k < refs.size(); ++k) {
    const auto r = tokenize(refs[k].text);
    const auto h = tokenize(hyps[k].text);
    const EditAlignment a = edit_distance(r, h);
    totals.substitutions += a.substitutions;
    totals.deletions += a.deletions;
    totals.insertions += a.insertions;
    totals.distance += a.distance;
    totals.ref_len += a.ref_len;
    const double denom = a.ref_len > 0 ? static_cast<double>(a.ref_len) : 1.0;
    report.per_segment.push_back(100.0 * static_cast<double>(a.distance) / denom);
  }
  if (totals.ref_len == 0)
    fail(metric, ": total reference token count is zero; rate is undefined");
  report.corpus_score = 100.0 * static_cast<double>(totals.distance) /
                        static_cast<double>(totals.ref_len);
  report.edit = totals;
  return report;
}

}  // namespace detail

inline ScoreReport wer(std::span<const NormalizedText> refs,
                       std::span<const NormalizedText> hyps) {
  return detail::edit_rate(refs, hyps, "wer",
                           [](std::string_view s) { return split_words(s); });
}

inline ScoreReport cer(std::span<const NormalizedText> refs,
                       std::span<const NormalizedText> hyps) {
  return detail::edit_rate(refs, hyps, "cer",
                           [](std::string_view s) { return char_tokens(s); });
}

// ---------------------------------------------------------------------------
// BLEU.

enum class BleuSmoothing { kNone, kAdd1 };

inline BleuSmoothing smoothing_from_name(std::string_view name) {
  if (name == "none") return BleuSmoothing::kNone;
  if (name == "add1") return BleuSmoothing::kAdd1;
  fail("unknown BLEU smoothing '", std::string(name), "' (valid: add1, none)");
}

struct BleuCounts {
  std::vector<int64_t> matched;  // clipped matches per order, index n-1
  std::vector<int64_t> totals;   // hypothesis n-gram counts per order
  int64_t ref_len = 0;
  int64_t hyp_len = 0;

  explicit BleuCounts(int max_n = 4)
      : matched(static_cast<size_t>(max_n), 0),
        totals(static_cast<size_t>(max_n), 0) {}

  void add(const BleuCounts& other) {
    for (size_t n = 0; n < matched.size(); ++n) {
      matched[n] += other.matched[n];
      totals[n] += other.totals[n];
    }
    ref_len += other.ref_len;
    hyp_len += other.hyp_len;
  }
};

namespace detail {

// Map-based clipped n-gram matching. The MBR kernel computes the same
// counts through interned grams; both feed bleu_from_counts below so the
// two routes produce bit-identical scores.
inline BleuCounts bleu_count_pair(std::span<const std::string> ref,
                                  std::span<const std::string> hyp, int max_n) {
  BleuCounts c(max_n);
  c.ref_len = static_cast<int64_t>(ref.size());
  c.hyp_len = static_cast<int64_t>(hyp.size());
  constexpr char kSep = '\x1e';
  for (int n = 1; n <= max_n; ++n) {
    std::unordered_map<std::string, int64_t> ref_counts;
    for (size_t i = 0; i + n <= ref.size(); ++i) {
      std::string key;
      for (int k = 0; k < n; ++k) {
        key += ref[i + k];
        key += kSep;
      }
      ++ref_counts[key];
    }
    std::unordered_map<std::string, int64_t> hyp_counts;
    for (size_t i = 0; i + n <= hyp.size(); ++i) {
      std::string key;
      for (int k = 0; k < n; ++k) {
        key += hyp[i + k];
        key += kSep;
      }
      ++hyp_counts[key];
    }
    int64_t matched = 0, total = 0;
    for (const auto& [gram, count] : hyp_counts) {
      total += count;
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    c.matched[n - 1] = matched;
    c.totals[n - 1] = total;
  }
  return c;
}

}  // namespace detail

// Turns pooled counts into a BLEU breakdown. With kNone smoothing the score
// is 0 as soon as any order has no match; kAdd1 adds one to numerator and
// denominator for orders n >= 2 only, so exact matches still score 100.
inline BleuBreakdown bleu_from_counts(const BleuCounts& c, BleuSmoothing smoothing) {
  const int max_n = static_cast<int>(c.matched.size());
  BleuBreakdown b;
  b.matched = c.matched;
  b.totals = c.totals;
  b.hyp_len = c.hyp_len;
  b.ref_len = c.ref_len;
  b.precisions.resize(static_cast<size_t>(max_n), 0.0);
  for (int n = 0; n < max_n; ++n)
    if (c.totals[n] > 0)
      b.precisions[n] = static_cast<double>(c.matched[n]) /
                        static_cast<double>(c.totals[n]);
  if (c.hyp_len == 0) {
    b.brevity_penalty = 0.0;
    b.score = 0.0;
    return b;
  }
  b.brevity_penalty =
      c.hyp_len >= c.ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(c.ref_len) /
                               static_cast<double>(c.hyp_len));
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    int64_t m = c.matched[n], t = c.totals[n];
    if (smoothing == BleuSmoothing::kAdd1 && n >= 1) {
      m += 1;
      t += 1;
    }
    if (m == 0 || t == 0) {
      b.score = 0.0;
      return b;
    }
    log_sum += std::log(static_cast<double>(m) / static_cast<double>(t));
  }
  b.score = b.brevity_penalty * std::exp(log_sum / max_n) * 100.0;
  return b;
}

inline BleuBreakdown bleu_corpus(std::span<const NormalizedText> refs,
                                 std::span<const NormalizedText> hyps,
                                 int max_n = 4) {
  detail::shared_profile(refs, hyps, "bleu");
  BleuCounts pooled(max_n);
  for (size_t k = 0; k < refs.size(); ++k) {
    const auto r = split_words(refs[k].text);
    const auto h = split_words(hyps[k].text);
    pooled.add(detail::bleu_count_pair(r, h, max_n));
  }
  return bleu_from_counts(pooled, BleuSmoothing::kNone);
}

// Sentence-level BLEU, total over all inputs (the MBR utility). An empty
// hypothesis scores 0.
inline double bleu_sentence(const NormalizedText& ref, const NormalizedText& hyp,
                            BleuSmoothing smoothing = BleuSmoothing::kAdd1,
                            int max_n = 4) {
  const auto r = split_words(ref.text);
  const auto h = split_words(hyp.text);
  return bleu_from_counts(detail::bleu_count_pair(r, h, max_n), smoothing).score;
}

// ---------------------------------------------------------------------------
// chrF.

struct ChrfCounts {
  std::vector<int64_t> matched, ref_totals, hyp_totals;  // per order, index n-1

  explicit ChrfCounts(int n_max = 6)
      : matched(static_cast<size_t>(n_max), 0),
        ref_totals(static_cast<size_t>(n_max), 0),
        hyp_totals(static_cast<size_t>(n_max), 0) {}

  void add(const ChrfCounts& other) {
    for (size_t n = 0; n < matched.size(); ++n) {
      matched[n] += other.matched[n];
      ref_totals[n] += other.ref_totals[n];
      hyp_totals[n] += other.hyp_totals[n];
    }
  }
};

namespace detail {

inline ChrfCounts chrf_count_pair(const std::u32string& ref,
                                  const std::u32string& hyp, int n_max) {
  ChrfCounts c(n_max);
  for (int n = 1; n <= n_max; ++n) {
    std::unordered_map<std::u32string, int64_t> ref_counts;
    for (size_t i = 0; i + n <= ref.size(); ++i)
      ++ref_counts[ref.substr(i, static_cast<size_t>(n))];
    std::unordered_map<std::u32string, int64_t> hyp_counts;
    for (size_t i = 0; i + n <= hyp.size(); ++i)
      ++hyp_counts[hyp.substr(i, static_cast<size_t>(n))];
    int64_t matched = 0;
    for (const auto& [gram, count] : hyp_counts) {
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    c.matched[n - 1] = matched;
    c.ref_totals[n - 1] =
        static_cast<int64_t>(ref.size()) >= n
            ? static_cast<int64_t>(ref.size()) - n + 1
            : 0;
    c.hyp_totals[n - 1] =
        static_cast<int64_t>(hyp.size()) >= n
            ? static_cast<int64_t>(hyp.size()) - n + 1
            : 0;
  }
  return c;
}

}  // namespace detail

// Precision and recall are averaged uniformly over orders 1..n_max; orders
// where both sides have no n-grams are skipped.
inline ChrfBreakdown chrf_from_counts(const ChrfCounts& c, double beta) {
  ChrfBreakdown b;
  b.n_max = static_cast<int>(c.matched.size());
  b.beta = beta;
  double p_sum = 0.0, r_sum = 0.0;
  int orders = 0;
  for (size_t n = 0; n < c.matched.size(); ++n) {
    if (c.ref_totals[n] == 0 && c.hyp_totals[n] == 0) continue;
    ++orders;
    if (c.hyp_totals[n] > 0)
      p_sum += static_cast<double>(c.matched[n]) /
               static_cast<double>(c.hyp_totals[n]);
    if (c.ref_totals[n] > 0)
      r_sum += static_cast<double>(c.matched[n]) /
               static_cast<double>(c.ref_totals[n]);
  }
  if (orders == 0) return b;
  b.precision = p_sum / orders;
  b.recall = r_sum / orders;
  const double denom = beta * beta * b.precision + b.recall;
  if (denom > 0.0)
    b.score = 100.0 * (1.0 + beta * beta) * b.precision * b.recall / denom;
  return b;
}

inline ChrfBreakdown chrf_sentence_breakdown(const NormalizedText& ref,
                                             const NormalizedText& hyp,
                                             int n_max = 6, double beta = 2.0) {
  return chrf_from_counts(
      detail::chrf_count_pair(chars_no_space(ref.text), chars_no_space(hyp.text),
                              n_max),
      beta);
}

inline double chrf_sentence(const NormalizedText& ref, const NormalizedText& hyp,
                            int n_max = 6, double beta = 2.0) {
  return chrf_sentence_breakdown(ref, hyp, n_max, beta).score;
}

inline ChrfBreakdown chrf_corpus(std::span<const NormalizedText> refs,
                                 std::span<const NormalizedText> hyps,
                                 int n_max = 6, double beta = 2.0) {
  detail::shared_profile(refs, hyps, "chrf");
  ChrfCounts pooled(n_max);
  for (size_t k = 0; k < refs.size(); ++k)
    pooled.add(detail::chrf_count_pair(chars_no_space(refs[k].text),
                                       chars_no_space(hyps[k].text), n_max));
  return chrf_from_counts(pooled, beta);
}

// ---------------------------------------------------------------------------
// Full reports for the CLI. Per-segment BLEU uses add1-smoothed sentence
// scores (the corpus score stays pooled and unsmoothed); per-segment chrF
// scores each pair on its own.

inline ScoreReport bleu_report(std::span<const NormalizedText> refs,
                               std::span<const NormalizedText> hyps,
                               int max_n = 4) {
  ScoreReport report;
  report.metric = "bleu";
  report.profile = detail::shared_profile(refs, hyps, "bleu");
  report.segment_count = refs.size();
  report.bleu = bleu_corpus(refs, hyps, max_n);
  report.corpus_score = report.bleu->score;
  for (size_t k = 0; k < refs.size(); ++k)
    report.per_segment.push_back(
        bleu_sentence(refs[k], hyps[k], BleuSmoothing::kAdd1, max_n));
  return report;
}

inline ScoreReport chrf_report(std::span<const NormalizedText> refs,
                               std::span<const NormalizedText> hyps,
                               int n_max = 6, double beta = 2.0) {
  ScoreReport report;
  report.metric = "chrf";
  report.profile = detail::shared_profile(refs, hyps, "chrf");
  report.segment_count = refs.size();
  report.chrf = chrf_corpus(refs, hyps, n_max, beta);
  report.corpus_score = report.chrf->score;
  for (size_t k = 0; k < refs.size(); ++k)
    report.per_segment.push_back(chrf_sentence(refs[k], hyps[k], n_max, beta));
  return report;
}

}  // namespace mbrfuse::metrics
