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

#include <cmath>
#include <istream>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbrfuse/error.hpp"
#include "mbrfuse/numio.hpp"

namespace mbrfuse::feat {

// A T x D matrix of per-frame coefficients, row-major. The frame period is
// carried as metadata only; no operation interprets it.
struct FeatureSequence {
  size_t dim = 0;
  std::vector<double> data;
  std::optional<double> frame_period_ms;

  size_t frames() const { return dim == 0 ? 0 : data.size() / dim; }

  std::span<const double> frame(size_t t) const {
    return {data.data() + t * dim, dim};
  }

  double& at(size_t t, size_t d) { return data[t * dim + d]; }
  double at(size_t t, size_t d) const { return data[t * dim + d]; }

  static FeatureSequence from_rows(const std::vector<std::vector<double>>& rows,
                                   std::optional<double> period = {}) {
    FeatureSequence f;
    f.frame_period_ms = period;
    if (rows.empty()) fail("feature sequence needs at least one frame");
    f.dim = rows.front().size();
    if (f.dim == 0) fail("feature frames need at least one coefficient");
    for (const auto& row : rows) {
      if (row.size() != f.dim)
        fail("feature rows have differing dimensions (", f.dim, " vs ",
             row.size(), ")");
      f.data.insert(f.data.end(), row.begin(), row.end());
    }
    return f;
  }
};

// CSV: one frame per row, D numeric columns; an optional first line
// `# frame_period_ms=<value>`. All values must be finite and every row
// must have the same column count.
inline FeatureSequence load_features_csv(std::istream& in,
                                         std::string_view source) {
  FeatureSequence f;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("# frame_period_ms=", 0) == 0) {
      f.frame_period_ms = numio::parse_double(
          std::string_view(line).substr(18),
          std::string(source) + ":" + std::to_string(lineno));
      continue;
    }
    if (line.empty()) continue;
    const std::string context = std::string(source) + ":" + std::to_string(lineno);
    std::vector<double> row;
    size_t start = 0;
    while (start <= line.size()) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      const double v = numio::parse_double(
          std::string_view(line).substr(start, comma - start), context);
      if (!std::isfinite(v)) fail(context, ": non-finite value");
      row.push_back(v);
      start = comma + 1;
    }
    if (f.dim == 0) {
      f.dim = row.size();
    } else if (row.size() != f.dim) {
      fail(context, ": row has ", row.size(), " columns, expected ", f.dim);
    }
    f.data.insert(f.data.end(), row.begin(), row.end());
  }
  if (f.data.empty()) fail(source, ": no feature frames");
  return f;
}

inline void write_features_csv(std::ostream& out, const FeatureSequence& f) {
  if (f.frame_period_ms)
    out << "# frame_period_ms=" << numio::dtos(*f.frame_period_ms) << "\n";
  for (size_t t = 0; t < f.frames(); ++t) {
    for (size_t d = 0; d < f.dim; ++d) {
      if (d != 0) out << ',';
      out << numio::dtos(f.at(t, d));
    }
    out << '\n';
  }
}

}  // namespace mbrfuse::feat
