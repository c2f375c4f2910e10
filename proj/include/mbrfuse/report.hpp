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
// Machine-readable report rendering. The shapes mirror the JSON schema
// files shipped under schemas/.

#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "mbrfuse/datakit.hpp"
#include "mbrfuse/mbr.hpp"
#include "mbrfuse/mcd.hpp"
#include "mbrfuse/metrics.hpp"

namespace mbrfuse::report {

using json = nlohmann::ordered_json;

inline json score_report_json(const metrics::ScoreReport& r) {
  json j;
  j["metric"] = r.metric;
  j["profile"] = r.profile;
  j["segment_count"] = r.segment_count;
  j["corpus_score"] = r.corpus_score;
  j["per_segment"] = r.per_segment;
  if (r.edit) {
    j["edit"] = {{"substitutions", r.edit->substitutions},
                 {"deletions", r.edit->deletions},
                 {"insertions", r.edit->insertions},
                 {"distance", r.edit->distance},
                 {"ref_len", r.edit->ref_len}};
  }
  if (r.bleu) {
    j["bleu"] = {{"precisions", r.bleu->precisions},
                 {"matched", r.bleu->matched},
                 {"totals", r.bleu->totals},
                 {"brevity_penalty", r.bleu->brevity_penalty},
                 {"hyp_len", r.bleu->hyp_len},
                 {"ref_len", r.bleu->ref_len},
                 {"score", r.bleu->score}};
  }
  if (r.chrf) {
    j["chrf"] = {{"n_max", r.chrf->n_max},
                 {"beta", r.chrf->beta},
                 {"precision", r.chrf->precision},
                 {"recall", r.chrf->recall},
                 {"score", r.chrf->score}};
  }
  return j;
}

inline json mbr_audit_json(std::span<const mbr::SegmentSelection> selections,
                           const mbr::CombineOptions& options,
                           const std::string& profile) {
  json j;
  j["utility"] = std::string(mbr::utility_name(options.utility));
  j["exclude_self"] = options.exclude_self;
  j["profile"] = profile;
  j["weight_a"] = options.weight_a;
  j["weight_b"] = options.weight_b;
  json segments = json::array();
  for (const auto& s : selections) {
    segments.push_back({{"segment_id", s.segment_id},
                        {"selected_index", s.index},
                        {"selected_system", s.hypothesis.system},
                        {"selected_rank", s.hypothesis.rank},
                        {"expected_utility", s.expected}});
  }
  j["segments"] = std::move(segments);
  return j;
}

inline json filter_report_json(const datakit::FilterReport& r) {
  json j;
  j["input_count"] = r.input_count;
  j["kept"] = r.kept;
  j["dropped_by_rule"] = json::object();
  for (const auto& [rule, count] : r.dropped_by_rule)
    j["dropped_by_rule"][rule] = count;
  j["flagged"] = json::object();
  for (const auto& [rule, count] : r.flagged) j["flagged"][rule] = count;
  return j;
}

inline json mcd_report_json(const mcd::McdResult& r, size_t ref_frames,
                            size_t hyp_frames) {
  json j;
  j["mcd_db"] = r.mcd_db;
  j["constant"] = mcd::kMcdConstant;
  j["range"] = {{"lo", r.range.lo}, {"hi", r.range.hi}};
  j["ref_frames"] = ref_frames;
  j["hyp_frames"] = hyp_frames;
  j["path_length"] = r.path.pairs.size();
  j["total_cost"] = r.path.total_cost;
  return j;
}

}  // namespace mbrfuse::report
