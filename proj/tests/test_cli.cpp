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

#include "mbrfuse/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "schema_check.hpp"

using namespace mbrfuse;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case.
struct TempDir {
  fs::path path;

  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("mbrfuse_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }

  fs::path file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Captured {
  int code = 0;
  std::string out;
  std::string err;
};

Captured run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Captured result;
  result.code = cli::run(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

nlohmann::json load_schema(const std::string& name) {
  const fs::path p = fs::path(MBRFUSE_SOURCE_DIR) / "schemas" / name;
  std::ifstream in(p);
  REQUIRE(in);
  return nlohmann::json::parse(in);
}

void check_schema(const nlohmann::json& value, const std::string& schema_name) {
  const auto errors = schema_check::validate(value, load_schema(schema_name));
  for (const auto& e : errors) UNSCOPED_INFO(e);
  REQUIRE(errors.empty());
}

const std::string kPoolA =
    R"({"segment_id": "1", "system": "cascaded", "rank": 0, "text": "The cat sat on the mat."})"
    "\n"
    R"({"segment_id": "1", "system": "cascaded", "rank": 1, "text": "The cat sat on a mat."})"
    "\n"
    R"({"segment_id": "2", "system": "cascaded", "rank": 0, "text": "We went home early."})"
    "\n"
    R"({"segment_id": "2", "system": "cascaded", "rank": 1, "text": "Unrelated gibberish entirely."})"
    "\n";

const std::string kPoolB =
    R"({"segment_id": "1", "system": "e2e", "rank": 0, "text": "The cat sat on the rug."})"
    "\n"
    R"({"segment_id": "2", "system": "e2e", "rank": 0, "text": "We went home late."})"
    "\n";

}  // namespace

TEST_CASE("norm writes normalized lines and is idempotent at file level") {
  TempDir tmp;
  const auto in = tmp.file("in.txt", "Hello, World!\n\nA  B\tC\n");
  const auto out = tmp.path / "out.txt";
  const auto r = run_cli({"norm", "--profile", "iwslt-eval", "--in", in.string(),
                          "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(out) == "hello world\n\na b c\n");

  const auto out2 = tmp.path / "out2.txt";
  const auto r2 = run_cli({"norm", "--profile", "iwslt-eval", "--in",
                           out.string(), "--out", out2.string()});
  REQUIRE(r2.code == 0);
  CHECK(slurp(out2) == slurp(out));
}

TEST_CASE("norm honors a custom mapping file") {
  TempDir tmp;
  const auto mapping = tmp.file("map.tsv", "ة\tه\n");
  const auto in = tmp.file("in.txt", "مدرسة\n");
  const auto out = tmp.path / "out.txt";
  const auto r = run_cli({"norm", "--profile", "apc", "--mapping",
                          mapping.string(), "--in", in.string(), "--out",
                          out.string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(out) == "مدرسه\n");
}

TEST_CASE("score normalizes both sides before comparing") {
  TempDir tmp;
  const auto ref = tmp.file("ref.txt", "Hello!\n");
  const auto hyp = tmp.file("hyp.txt", "hello\n");
  const auto with_norm = run_cli({"score", "--metric", "wer", "--ref",
                                  ref.string(), "--hyp", hyp.string()});
  REQUIRE(with_norm.code == 0);
  CHECK(with_norm.out.find("wer: 0.0") != std::string::npos);
  CHECK(with_norm.out.find("profile: iwslt-eval") != std::string::npos);

  const auto raw = run_cli({"score", "--metric", "wer", "--ref", ref.string(),
                            "--hyp", hyp.string(), "--profile", "none"});
  REQUIRE(raw.code == 0);
  CHECK(raw.out.find("wer: 100.0") != std::string::npos);
}

TEST_CASE("score emits a schema-conforming JSON report") {
  TempDir tmp;
  const auto ref = tmp.file("ref.txt", "the cat sat on the mat\nx y\n");
  const auto hyp = tmp.file("hyp.txt", "the cat sat on mat\nx y\n");
  for (const std::string metric : {"wer", "cer", "bleu", "chrf"}) {
    const auto r = run_cli({"score", "--metric", metric, "--ref", ref.string(),
                            "--hyp", hyp.string(), "--json"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    check_schema(j, "score_report.schema.json");
    CHECK(j["metric"] == metric);
    CHECK(j["segment_count"] == 2);
  }
}

TEST_CASE("mismatched line counts exit 1 naming both counts") {
  TempDir tmp;
  const auto ref = tmp.file("ref.txt", "a\nb\nc\n");
  const auto hyp = tmp.file("hyp.txt", "a\n");
  const auto r = run_cli({"score", "--metric", "wer", "--ref", ref.string(),
                          "--hyp", hyp.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("3") != std::string::npos);
  CHECK(r.err.find("1") != std::string::npos);
}

TEST_CASE("empty corpora exit 1") {
  TempDir tmp;
  const auto ref = tmp.file("ref.txt", "");
  const auto hyp = tmp.file("hyp.txt", "");
  const auto r = run_cli({"score", "--metric", "bleu", "--ref", ref.string(),
                          "--hyp", hyp.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("empty corpus") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"score", "--metric", "wer"}).code == 2);       // missing files
  CHECK(run_cli({"score", "--metric", "rouge", "--ref", "r", "--hyp", "h"}).code ==
        2);  // bad choice
  CHECK(run_cli({"norm", "--profile", "klingon", "--in", "x", "--out", "y"}).code ==
        2);
}

TEST_CASE("missing input files exit 1") {
  const auto r = run_cli({"score", "--metric", "wer", "--ref", "/nonexistent/r",
                          "--hyp", "/nonexistent/h"});
  CHECK(r.code == 1);
  CHECK(r.err.find("cannot open") != std::string::npos);
}

TEST_CASE("mbr end to end selects consensus and writes a valid audit") {
  TempDir tmp;
  const auto pool_a = tmp.file("a.jsonl", kPoolA);
  const auto pool_b = tmp.file("b.jsonl", kPoolB);
  const auto out = tmp.path / "out.txt";
  const auto audit = tmp.path / "audit.json";
  const auto r = run_cli({"mbr", "--pool-a", pool_a.string(), "--pool-b",
                          pool_b.string(), "--out", out.string(), "--audit",
                          audit.string()});
  REQUIRE(r.code == 0);
  const auto lines = slurp(out);
  // Selected texts are the raw hypotheses, original casing and punctuation.
  CHECK(lines.find("The cat sat on") == 0);
  CHECK(lines.find("We went home") != std::string::npos);

  const auto audit_json = nlohmann::json::parse(slurp(audit));
  check_schema(audit_json, "mbr_audit.schema.json");
  REQUIRE(audit_json["segments"].size() == 2);
  CHECK(audit_json["segments"][0]["segment_id"] == "1");
  CHECK(audit_json["segments"][0]["expected_utility"].size() == 3);
}

TEST_CASE("mbr runs are byte-identical") {
  TempDir tmp;
  const auto pool_a = tmp.file("a.jsonl", kPoolA);
  const auto pool_b = tmp.file("b.jsonl", kPoolB);
  const auto out1 = tmp.path / "out1.txt";
  const auto out2 = tmp.path / "out2.txt";
  const auto audit1 = tmp.path / "audit1.json";
  const auto audit2 = tmp.path / "audit2.json";
  REQUIRE(run_cli({"mbr", "--pool-a", pool_a.string(), "--pool-b",
                   pool_b.string(), "--out", out1.string(), "--audit",
                   audit1.string()})
              .code == 0);
  REQUIRE(run_cli({"mbr", "--pool-a", pool_a.string(), "--pool-b",
                   pool_b.string(), "--out", out2.string(), "--audit",
                   audit2.string()})
              .code == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(audit1) == slurp(audit2));
}

TEST_CASE("mbr weights flag accepts wa,wb and rejects junk") {
  TempDir tmp;
  const auto pool_a = tmp.file("a.jsonl", kPoolA);
  const auto pool_b = tmp.file("b.jsonl", kPoolB);
  const auto out = tmp.path / "out.txt";
  CHECK(run_cli({"mbr", "--pool-a", pool_a.string(), "--pool-b", pool_b.string(),
                 "--out", out.string(), "--weights", "2,1"})
            .code == 0);
  CHECK(run_cli({"mbr", "--pool-a", pool_a.string(), "--pool-b", pool_b.string(),
                 "--out", out.string(), "--weights", "nope"})
            .code == 1);
}

TEST_CASE("malformed pool lines exit 1 with the line number, leaving no output") {
  TempDir tmp;
  const auto pool_a = tmp.file(
      "a.jsonl",
      R"({"segment_id": "1", "system": "cascaded", "rank": 0, "text": "x"})"
      "\nnot json at all\n");
  const auto pool_b = tmp.file(
      "b.jsonl",
      R"({"segment_id": "1", "system": "e2e", "rank": 0, "text": "y"})"
      "\n");
  const auto out = tmp.path / "out.txt";
  const auto r = run_cli({"mbr", "--pool-a", pool_a.string(), "--pool-b",
                          pool_b.string(), "--out", out.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find(":2") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
  CHECK_FALSE(fs::exists(out.string() + ".tmp"));
}

TEST_CASE("pools with rank gaps are rejected") {
  TempDir tmp;
  const auto pool_a = tmp.file(
      "a.jsonl",
      R"({"segment_id": "1", "system": "cascaded", "rank": 0, "text": "x"})"
      "\n"
      R"({"segment_id": "1", "system": "cascaded", "rank": 2, "text": "z"})"
      "\n");
  const auto pool_b = tmp.file(
      "b.jsonl",
      R"({"segment_id": "1", "system": "e2e", "rank": 0, "text": "y"})"
      "\n");
  const auto r = run_cli({"mbr", "--pool-a", pool_a.string(), "--pool-b",
                          pool_b.string(), "--out", (tmp.path / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("rank") != std::string::npos);
}

TEST_CASE("filter end to end keeps the boundary and reports drops") {
  TempDir tmp;
  const auto manifest = tmp.file(
      "m.jsonl",
      R"({"id": "a", "duration_secs": 14.9, "source_text": "w w"})"
      "\n"
      R"({"id": "b", "duration_secs": 15.0, "source_text": "w w"})"
      "\n"
      R"({"id": "c", "duration_secs": 15.1, "source_text": "w w"})"
      "\n"
      R"({"id": "d", "source_text": "w w"})"
      "\n");
  const auto out = tmp.path / "out.jsonl";
  const auto report = tmp.path / "report.json";
  const auto r = run_cli({"filter", "--manifest", manifest.string(),
                          "--max-duration", "15.0", "--out", out.string(),
                          "--report", report.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == "kept 3/4\n");
  const auto report_json = nlohmann::json::parse(slurp(report));
  check_schema(report_json, "filter_report.schema.json");
  CHECK(report_json["kept"] == 3);
  CHECK(report_json["dropped_by_rule"]["duration"] == 1);
  CHECK(report_json["flagged"]["no-duration"] == 1);
  // The kept manifest round-trips as JSON-lines with ids a, b, d.
  std::istringstream in(slurp(out));
  const auto records = io::load_manifest(in, "out.jsonl");
  REQUIRE(records.size() == 3);
  CHECK(records[0].id == "a");
  CHECK(records[1].id == "b");
  CHECK(records[2].id == "d");
}

TEST_CASE("filter applies duration then ratio, first rule wins") {
  TempDir tmp;
  const auto manifest = tmp.file(
      "m.jsonl",
      R"({"id": "slow", "duration_secs": 20.0, "source_text": "w"})"
      "\n"
      R"({"id": "fast", "duration_secs": 10.0, "source_text": "w"})"
      "\n"
      R"({"id": "ok", "duration_secs": 1.0, "source_text": "w w"})"
      "\n");
  const auto out = tmp.path / "out.jsonl";
  const auto report = tmp.path / "report.json";
  const auto r = run_cli({"filter", "--manifest", manifest.string(),
                          "--max-duration", "15", "--ratio-min", "0.1",
                          "--ratio-max", "1.0", "--out", out.string(),
                          "--report", report.string()});
  REQUIRE(r.code == 0);
  const auto report_json = nlohmann::json::parse(slurp(report));
  CHECK(report_json["input_count"] == 3);
  CHECK(report_json["kept"] == 1);
  CHECK(report_json["dropped_by_rule"]["duration"] == 1);      // "slow"
  CHECK(report_json["dropped_by_rule"]["length-ratio"] == 1);  // "fast"
}

TEST_CASE("ratio bounds must come together") {
  TempDir tmp;
  const auto manifest = tmp.file("m.jsonl", R"({"id": "a", "source_text": "w"})"
                                            "\n");
  const auto r = run_cli({"filter", "--manifest", manifest.string(),
                          "--ratio-min", "0.1", "--out",
                          (tmp.path / "o").string(), "--report",
                          (tmp.path / "r").string()});
  CHECK(r.code == 2);
}

TEST_CASE("duplicate manifest ids are rejected with both line numbers") {
  TempDir tmp;
  const auto manifest = tmp.file("m.jsonl",
                                 R"({"id": "a", "source_text": "w"})"
                                 "\n"
                                 R"({"id": "a", "source_text": "w"})"
                                 "\n");
  const auto r = run_cli({"filter", "--manifest", manifest.string(),
                          "--max-duration", "15", "--out",
                          (tmp.path / "o").string(), "--report",
                          (tmp.path / "r").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("duplicate id") != std::string::npos);
  CHECK(r.err.find(":2") != std::string::npos);
}

TEST_CASE("augment is byte-identical per seed and changes with the seed") {
  TempDir tmp;
  std::string csv = "# frame_period_ms=10\n";
  for (int t = 0; t < 20; ++t) csv += "0.5,1.5,-0.25,0\n";
  const auto feats = tmp.file("f.csv", csv);
  const auto out1 = tmp.path / "o1.csv";
  const auto out2 = tmp.path / "o2.csv";
  const auto out3 = tmp.path / "o3.csv";
  const std::vector<std::string> base = {"augment", "--feats", feats.string(),
                                         "--sigma", "0.1", "--time-mask", "4,1",
                                         "--freq-mask", "2,1"};
  auto with = [&](const std::string& seed, const fs::path& out) {
    auto args = base;
    args.insert(args.end(), {"--seed", seed, "--out", out.string()});
    return run_cli(args).code;
  };
  REQUIRE(with("5", out1) == 0);
  REQUIRE(with("5", out2) == 0);
  REQUIRE(with("6", out3) == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(out1) != slurp(out3));
  // Shape preserved: same row/column counts as the input.
  std::istringstream in(slurp(out1));
  const auto f = feat::load_features_csv(in, "o1.csv");
  CHECK(f.frames() == 20);
  CHECK(f.dim == 4);
}

TEST_CASE("mcd end to end with a custom range emits valid JSON") {
  TempDir tmp;
  const auto ref = tmp.file("ref.csv", "0,0,0\n1,0,0\n2,0,0\n");
  const auto hyp = tmp.file("hyp.csv", "0,0,0\n1,0,0\n1,0,0\n2,0,0\n");
  const auto r = run_cli({"mcd", "--ref", ref.string(), "--hyp", hyp.string(),
                          "--range", "0:2", "--json"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  check_schema(j, "mcd_report.schema.json");
  CHECK(j["mcd_db"] == 0.0);
  CHECK(j["total_cost"] == 0.0);
  CHECK(j["path_length"] == 4);
}

TEST_CASE("mcd rejects mismatched feature dimensions") {
  TempDir tmp;
  const auto ref = tmp.file("ref.csv", "0,0\n");
  const auto hyp = tmp.file("hyp.csv", "0,0,0\n");
  const auto r = run_cli({"mcd", "--ref", ref.string(), "--hyp", hyp.string(),
                          "--range", "0:1"});
  CHECK(r.code == 1);
  CHECK(r.err.find("dimension") != std::string::npos);
}

TEST_CASE("flags can come from a config file") {
  TempDir tmp;
  const auto in = tmp.file("in.txt", "HELLO!\n");
  const auto out = tmp.path / "out.txt";
  const auto cfg = tmp.file("run.cfg", "[norm]\nprofile=iwslt-eval\nin=\"" +
                                           in.string() + "\"\nout=\"" +
                                           out.string() + "\"\n");
  const auto r = run_cli({"--config", cfg.string(), "norm"});
  REQUIRE(r.code == 0);
  CHECK(slurp(out) == "hello\n");
}

TEST_CASE("pipeline_score rejects aligned-but-empty input and honors profiles") {
  TempDir tmp;
  const auto ref = tmp.file("ref.txt", "Hello!\n");
  const auto hyp = tmp.file("hyp.txt", "hello\n");
  const auto report = cli::pipeline_score(ref, hyp, "wer",
                                          textnorm::NormProfile::named("iwslt-eval"));
  CHECK(report.corpus_score == 0.0);
  CHECK(report.profile == "iwslt-eval");
  const auto raw = cli::pipeline_score(ref, hyp, "wer",
                                       textnorm::NormProfile::named("none"));
  CHECK(raw.corpus_score == 100.0);
}
