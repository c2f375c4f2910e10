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

#pragma once

#include <cstdint>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "mbrfuse/unicode_tables.hpp"

namespace mbrfuse::uni {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes one UTF-8 sequence starting at s[pos], advancing pos.
// Malformed bytes decode to U+FFFD, one byte at a time, so decoding is
// total and re-encoding a decoded string is stable.
inline char32_t decode_one(std::string_view s, size_t& pos) {
  const auto byte = [&](size_t i) { return static_cast<unsigned char>(s[i]); };
  const unsigned char b0 = byte(pos);
  size_t len;
  char32_t cp;
  if (b0 < 0x80) {
    pos += 1;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    pos += 1;
    return kReplacement;
  }
  if (pos + len > s.size()) {
    pos += 1;
    return kReplacement;
  }
  for (size_t i = 1; i < len; ++i) {
    const unsigned char b = byte(pos + i);
    if ((b & 0xC0) != 0x80) {
      pos += 1;
      return kReplacement;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  // Reject overlong forms, surrogates, and out-of-range values.
  static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    pos += 1;
    return kReplacement;
  }
  pos += len;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  size_t pos = 0;
  while (pos < s.size()) out.push_back(decode_one(s, pos));
  return out;
}

inline std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

// Lowercases via the generated 1:1 mapping; identity for unmapped points.
inline char32_t to_lower(char32_t cp) {
  size_t lo = 0, hi = std::size(tables::kLowerMap);
  while (lo < hi) {
    const size_t mid = (lo + hi) / 2;
    if (tables::kLowerMap[mid][0] < cp)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < std::size(tables::kLowerMap) && tables::kLowerMap[lo][0] == cp)
    return tables::kLowerMap[lo][1];
  return cp;
}

// True when the code point has a distinct lowercase form. This is the
// "uppercase" class the normalizer removes; cased letters without a
// lowercase mapping (e.g. U+2102 DOUBLE-STRUCK C) are left alone.
inline bool has_lower(char32_t cp) { return to_lower(cp) != cp; }

// Unicode general category P* plus ASCII ispunct.
inline bool is_punct(char32_t cp) {
  size_t lo = 0, hi = std::size(tables::kPunctRanges);
  while (lo < hi) {
    const size_t mid = (lo + hi) / 2;
    if (tables::kPunctRanges[mid][1] < cp)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo < std::size(tables::kPunctRanges) &&
         tables::kPunctRanges[lo][0] <= cp && cp <= tables::kPunctRanges[lo][1];
}

// Unicode White_Space property.
inline bool is_space(char32_t cp) {
  for (uint32_t ws : tables::kWhitespace)
    if (ws == cp) return true;
  return false;
}

// Number of code points in a UTF-8 string.
inline size_t length(std::string_view s) {
  size_t n = 0, pos = 0;
  while (pos < s.size()) {
    decode_one(s, pos);
    ++n;
  }
  return n;
}

}  // namespace mbrfuse::uni
