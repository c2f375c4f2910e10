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
// File plumbing: UTF-8 line files, JSON-lines pools and manifests, and
// atomic output writes (temp file + rename, so failed runs never leave
// partial outputs behind).

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mbrfuse/datakit.hpp"
#include "mbrfuse/error.hpp"
#include "mbrfuse/mbr.hpp"
#include "mbrfuse/textnorm.hpp"

namespace mbrfuse::io {

using json = nlohmann::ordered_json;

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '", path.string(), "' for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Writes to <path>.tmp and renames on commit. If commit() is never
// reached, the destructor removes the temp file.
class AtomicFile {
 public:
  explicit AtomicFile(const std::filesystem::path& path)
      : path_(path), tmp_(path.string() + ".tmp"), out_(tmp_, std::ios::binary) {
    if (!out_) fail("cannot open '", tmp_.string(), "' for writing");
  }

  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) fail("failed writing '", tmp_.string(), "'");
    out_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) fail("cannot move '", tmp_.string(), "' to '", path_.string(), "': ",
                 ec.message());
    committed_ = true;
  }

  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

inline void write_text_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  AtomicFile file(path);
  file.stream() << content;
  file.commit();
}

// ---------------------------------------------------------------------------
// Hypothesis pools: JSON-lines, one record per hypothesis:
//   {"segment_id": str, "system": str, "rank": int, "text": str}

struct PoolRecord {
  std::string segment_id;
  std::string system;
  int64_t rank = 0;
  std::string text;
  size_t line = 0;
};

namespace detail {

inline json parse_json_line(const std::string& line, std::string_view source,
                            size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    fail(source, ":", lineno, ": malformed JSON record");
  if (!j.is_object()) fail(source, ":", lineno, ": expected a JSON object");
  return j;
}

template <typename T>
T require_field(const json& j, const char* key, std::string_view source,
                size_t lineno) {
  const auto it = j.find(key);
  if (it == j.end()) fail(source, ":", lineno, ": missing field '", key, "'");
  if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string())
      fail(source, ":", lineno, ": field '", key, "' must be a string");
  } else {
    if (!it->is_number())
      fail(source, ":", lineno, ": field '", key, "' must be a number");
  }
  return it->template get<T>();
}

}  // namespace detail

inline std::vector<PoolRecord> load_pool_records(std::istream& in,
                                                 std::string_view source) {
  std::vector<PoolRecord> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const json j = detail::parse_json_line(line, source, lineno);
    PoolRecord r;
    r.segment_id = detail::require_field<std::string>(j, "segment_id", source, lineno);
    r.system = detail::require_field<std::string>(j, "system", source, lineno);
    r.rank = detail::require_field<int64_t>(j, "rank", source, lineno);
    r.text = detail::require_field<std::string>(j, "text", source, lineno);
    if (r.rank < 0) fail(source, ":", lineno, ": rank must be >= 0");
    r.line = lineno;
    records.push_back(std::move(r));
  }
  if (records.empty()) fail(source, ": no hypothesis records");
  return records;
}

// One pool per segment plus the raw (pre-normalization) member texts,
// parallel to pool.members. A pool file carries exactly one system; ranks
// within a segment must be 0..k-1.
struct LoadedPool {
  mbr::HypothesisPool pool;
  std::vector<std::string> raw_texts;
};

inline std::vector<LoadedPool> build_pools(
    const std::vector<PoolRecord>& records, const textnorm::NormProfile& profile,
    const textnorm::NormOptions& opts, std::string_view source) {
  std::set<std::string> systems;
  for (const auto& r : records) systems.insert(r.system);
  if (systems.size() != 1)
    fail(source, ": pool file must contain a single system, found ",
         systems.size());
  std::map<std::string, std::vector<const PoolRecord*>> by_segment;
  for (const auto& r : records) by_segment[r.segment_id].push_back(&r);
  std::vector<LoadedPool> pools;
  pools.reserve(by_segment.size());
  for (auto& [segment_id, members] : by_segment) {
    std::sort(members.begin(), members.end(),
              [](const PoolRecord* a, const PoolRecord* b) {
                return a->rank < b->rank;
              });
    for (size_t k = 0; k < members.size(); ++k) {
      if (members[k]->rank != static_cast<int64_t>(k))
        fail(source, ":", members[k]->line, ": segment '", segment_id,
             "' has rank ", members[k]->rank, " but expected ", k,
             " (ranks must be 0..n-1 without gaps)");
    }
    LoadedPool loaded;
    loaded.pool.segment_id = segment_id;
    for (const PoolRecord* r : members) {
      loaded.pool.members.push_back(
          mbr::Hypothesis{textnorm::apply_profile(r->text, profile, opts),
                          r->system, static_cast<size_t>(r->rank)});
      loaded.pool.weights.push_back(1.0 / static_cast<double>(members.size()));
      loaded.raw_texts.push_back(r->text);
    }
    pools.push_back(std::move(loaded));
  }
  return pools;
}

// ---------------------------------------------------------------------------
// Sample manifests: JSON-lines of
//   {"id": str, "duration_secs": num?, "source_text": str,
//    "target_text": str?, "audio_ref": str?}

inline std::vector<datakit::SampleRecord> load_manifest(std::istream& in,
                                                        std::string_view source) {
  std::vector<datakit::SampleRecord> records;
  std::map<std::string, size_t> seen;  // id -> first line
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const json j = detail::parse_json_line(line, source, lineno);
    datakit::SampleRecord r;
    r.id = detail::require_field<std::string>(j, "id", source, lineno);
    r.source_text = detail::require_field<std::string>(j, "source_text", source, lineno);
    if (const auto it = j.find("duration_secs"); it != j.end() && !it->is_null()) {
      if (!it->is_number())
        fail(source, ":", lineno, ": field 'duration_secs' must be a number");
      r.duration_secs = it->get<double>();
      if (*r.duration_secs < 0.0)
        fail(source, ":", lineno, ": duration_secs must be >= 0");
    }
    if (const auto it = j.find("target_text"); it != j.end() && !it->is_null()) {
      if (!it->is_string())
        fail(source, ":", lineno, ": field 'target_text' must be a string");
      r.target_text = it->get<std::string>();
    }
    if (const auto it = j.find("audio_ref"); it != j.end() && !it->is_null()) {
      if (!it->is_string())
        fail(source, ":", lineno, ": field 'audio_ref' must be a string");
      r.audio_ref = it->get<std::string>();
    }
    const auto [at, inserted] = seen.emplace(r.id, lineno);
    if (!inserted)
      fail(source, ":", lineno, ": duplicate id '", r.id, "' (first at line ",
           at->second, ")");
    records.push_back(std::move(r));
  }
  return records;
}

inline json manifest_record_to_json(const datakit::SampleRecord& r) {
  json j;
  j["id"] = r.id;
  if (r.duration_secs) j["duration_secs"] = *r.duration_secs;
  j["source_text"] = r.source_text;
  if (r.target_text) j["target_text"] = *r.target_text;
  if (r.audio_ref) j["audio_ref"] = *r.audio_ref;
  return j;
}

inline std::string manifest_to_jsonl(std::span<const datakit::SampleRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += manifest_record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace mbrfuse::io
