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
// Text normalization profiles.
//
// `iwslt-eval` is the scoring convention used throughout the toolkit:
// lowercase, strip punctuation, collapse whitespace. `apc` / `aeb` add the
// Arabic-dialect steps (numeral mapping, orthographic mapping, clitic
// splitting) in front of it. All steps are pure string -> string functions
// and every named profile is idempotent.

#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mbrfuse/error.hpp"
#include "mbrfuse/unicode.hpp"

namespace mbrfuse::textnorm {

enum class Step {
  kLowercase,
  kStripPunct,
  kCompoundSplit,
  kOrthoMap,
  kNumeralMap,
  kWhitespaceCollapse,
};

inline constexpr std::array<std::pair<std::string_view, Step>, 6> kStepNames{{
    {"lowercase", Step::kLowercase},
    {"strip-punct", Step::kStripPunct},
    {"compound-split", Step::kCompoundSplit},
    {"ortho-map", Step::kOrthoMap},
    {"numeral-map", Step::kNumeralMap},
    {"whitespace-collapse", Step::kWhitespaceCollapse},
}};

inline Step step_from_name(std::string_view name) {
  for (const auto& [n, s] : kStepNames)
    if (n == name) return s;
  fail("unknown normalization step '", std::string(name),
       "' (known: lowercase, strip-punct, compound-split, ortho-map, "
       "numeral-map, whitespace-collapse)");
}

inline std::string_view step_name(Step s) {
  for (const auto& [n, v] : kStepNames)
    if (v == s) return n;
  return "?";
}

struct NormProfile {
  std::string name;
  std::vector<Step> steps;

  // Named profiles: iwslt-eval, apc, aeb, none.
  static NormProfile named(std::string_view name) {
    if (name == "none") return {"none", {}};
    if (name == "iwslt-eval")
      return {"iwslt-eval",
              {Step::kLowercase, Step::kStripPunct, Step::kWhitespaceCollapse}};
    if (name == "apc" || name == "aeb")
      // Clitic splitting runs after punctuation removal so that characters
      // between a clitic and the article cannot re-expose a split on a
      // second pass; the profile stays idempotent.
      return {std::string(name),
              {Step::kNumeralMap, Step::kOrthoMap, Step::kLowercase,
               Step::kStripPunct, Step::kCompoundSplit,
               Step::kWhitespaceCollapse}};
    fail("unknown normalization profile '", std::string(name),
         "' (valid: iwslt-eval, apc, aeb, none)");
  }
};

struct NormalizedText {
  std::string text;
  std::string profile;

  bool operator==(const NormalizedText&) const = default;
};

// Ordered pattern -> replacement rules applied left-to-right over the
// input, longest pattern first at each position. Replacements are not
// rescanned.
struct OrthoTable {
  std::vector<std::pair<std::string, std::string>> rules;

  // Default Arabic orthographic normalization:
  //   alef variants to bare alef, alef maqsura to yeh, tatweel and
  //   diacritics (U+064B..U+065F, U+0670) removed.
  // Taa marbuta -> heh is intentionally not included; supply a custom
  // table to enable it.
  static OrthoTable defaults() {
    OrthoTable t;
    auto add = [&t](char32_t from, std::string to) {
      std::string f;
      uni::append_utf8(f, from);
      t.rules.emplace_back(std::move(f), std::move(to));
    };
    add(0x0622, "ا");  // آ -> ا
    add(0x0623, "ا");  // أ -> ا
    add(0x0625, "ا");  // إ -> ا
    add(0x0649, "ي");  // ى -> ي
    add(0x0640, "");        // tatweel
    for (char32_t cp = 0x064B; cp <= 0x065F; ++cp) add(cp, "");
    add(0x0670, "");  // superscript alef
    return t;
  }

  // Two-column tab-separated lines: pattern<TAB>replacement. An empty
  // replacement deletes the pattern. Blank lines and lines starting with
  // '#' are skipped. Replaces the default table entirely.
  static OrthoTable load(std::istream& in, std::string_view source = "mapping") {
    OrthoTable t;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const size_t tab = line.find('\t');
      if (tab == std::string::npos)
        fail(source, ":", lineno, ": expected pattern<TAB>replacement");
      std::string pattern = line.substr(0, tab);
      if (pattern.empty()) fail(source, ":", lineno, ": empty pattern");
      t.rules.emplace_back(std::move(pattern), line.substr(tab + 1));
    }
    return t;
  }
};

struct NormOptions {
  OrthoTable ortho = OrthoTable::defaults();
  // Single-letter clitics split off the front of a token when the
  // remainder begins with the article. Longest clitic wins.
  std::vector<std::string> clitic_prefixes = {"و", "ف", "ب",
                                              "ل", "ك"};
  std::string clitic_article = "ال";  // ال
  size_t clitic_min_remainder = 2;              // code points
};

namespace detail {

inline std::string map_lowercase(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t pos = 0;
  while (pos < s.size()) uni::append_utf8(out, uni::to_lower(uni::decode_one(s, pos)));
  return out;
}

inline std::string strip_punct(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t pos = 0;
  while (pos < s.size()) {
    const char32_t cp = uni::decode_one(s, pos);
    if (!uni::is_punct(cp)) uni::append_utf8(out, cp);
  }
  return out;
}

inline std::string map_numerals(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t pos = 0;
  while (pos < s.size()) {
    char32_t cp = uni::decode_one(s, pos);
    if (cp >= 0x0660 && cp <= 0x0669)  // Eastern Arabic-Indic
      cp = '0' + (cp - 0x0660);
    else if (cp >= 0x06F0 && cp <= 0x06F9)  // Extended Arabic-Indic
      cp = '0' + (cp - 0x06F0);
    uni::append_utf8(out, cp);
  }
  return out;
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t pos = 0;
  bool pending_space = false;
  while (pos < s.size()) {
    const char32_t cp = uni::decode_one(s, pos);
    if (uni::is_space(cp)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      uni::append_utf8(out, cp);
    }
  }
  return out;
}

inline std::string apply_ortho(std::string_view s, const OrthoTable& table) {
  // Rule index sorted by descending pattern byte length, original order
  // breaking ties, so longest-match-first is stable.
  std::vector<size_t> order(table.rules.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return table.rules[a].first.size() > table.rules[b].first.size();
  });
  std::string out;
  out.reserve(s.size());
  size_t pos = 0;
  while (pos < s.size()) {
    bool matched = false;
    for (size_t idx : order) {
      const auto& [pattern, repl] = table.rules[idx];
      if (s.compare(pos, pattern.size(), pattern) == 0) {
        out += repl;
        pos += pattern.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      const size_t start = pos;
      uni::decode_one(s, pos);
      out.append(s.substr(start, pos - start));
    }
  }
  return out;
}

inline std::string split_token(const std::string& token, const NormOptions& o) {
  std::vector<size_t> order(o.clitic_prefixes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return o.clitic_prefixes[a].size() > o.clitic_prefixes[b].size();
  });
  for (size_t idx : order) {
    const std::string& clitic = o.clitic_prefixes[idx];
    if (clitic.empty() || token.size() <= clitic.size()) continue;
    if (token.compare(0, clitic.size(), clitic) != 0) continue;
    const std::string rest = token.substr(clitic.size());
    if (!o.clitic_article.empty() &&
        rest.compare(0, o.clitic_article.size(), o.clitic_article) != 0)
      continue;
    if (uni::length(rest) < o.clitic_min_remainder) continue;
    return clitic + " " + rest;
  }
  return token;
}

// Splits one clitic prefix off the front of each whitespace-separated
// token. Tokens are re-joined with single spaces.
inline std::string compound_split(std::string_view s, const NormOptions& o) {
  std::string out;
  out.reserve(s.size());
  std::string token;
  size_t pos = 0;
  auto flush = [&] {
    if (token.empty()) return;
    if (!out.empty()) out.push_back(' ');
    out += split_token(token, o);
    token.clear();
  };
  while (pos < s.size()) {
    const size_t start = pos;
    const char32_t cp = uni::decode_one(s, pos);
    if (uni::is_space(cp))
      flush();
    else
      token.append(s.substr(start, pos - start));
  }
  flush();
  return out;
}

}  // namespace detail

inline std::string apply_step(std::string_view text, Step step,
                              const NormOptions& opts) {
  switch (step) {
    case Step::kLowercase:
      return detail::map_lowercase(text);
    case Step::kStripPunct:
      return detail::strip_punct(text);
    case Step::kNumeralMap:
      return detail::map_numerals(text);
    case Step::kWhitespaceCollapse:
      return detail::collapse_whitespace(text);
    case Step::kOrthoMap:
      return detail::apply_ortho(text, opts.ortho);
    case Step::kCompoundSplit:
      return detail::compound_split(text, opts);
  }
  fail("unknown normalization step id ", static_cast<int>(step));
}

inline NormalizedText apply_profile(std::string_view text,
                                    const NormProfile& profile,
                                    const NormOptions& opts = {}) {
  std::string s(text);
  for (Step step : profile.steps) s = apply_step(s, step, opts);
  return {std::move(s), profile.name};
}

inline NormalizedText normalize_eval(std::string_view text) {
  return apply_profile(text, NormProfile::named("iwslt-eval"));
}

inline NormalizedText normalize_dialect(std::string_view text,
                                        std::string_view dialect,
                                        const NormOptions& opts = {}) {
  if (dialect != "apc" && dialect != "aeb")
    fail("unknown dialect '", std::string(dialect), "' (valid: apc, aeb)");
  return apply_profile(text, NormProfile::named(dialect), opts);
}

}  // namespace mbrfuse::textnorm
