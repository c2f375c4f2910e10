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
// The mbrfuse command-line tool: one binary, six subcommands (norm, score,
// mbr, mcd, filter, augment). Exit codes: 0 success, 1 data errors
// (missing or malformed inputs, mismatched corpora), 2 usage errors.
// Outputs are written atomically; a failed run leaves no partial files.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbrfuse/datakit.hpp"
#include "mbrfuse/error.hpp"
#include "mbrfuse/features.hpp"
#include "mbrfuse/io.hpp"
#include "mbrfuse/mbr.hpp"
#include "mbrfuse/mcd.hpp"
#include "mbrfuse/metrics.hpp"
#include "mbrfuse/parallel.hpp"
#include "mbrfuse/report.hpp"
#include "mbrfuse/textnorm.hpp"

namespace mbrfuse::cli {

// Normalizes both sides with the same profile, then scores. The report
// records the profile, so scores from different conventions are never
// silently compared.
inline metrics::ScoreReport pipeline_score(
    const std::filesystem::path& ref_file, const std::filesystem::path& hyp_file,
    std::string_view metric, const textnorm::NormProfile& profile,
    const textnorm::NormOptions& opts = {}) {
  const auto ref_lines = io::read_lines(ref_file);
  const auto hyp_lines = io::read_lines(hyp_file);
  if (ref_lines.size() != hyp_lines.size())
    fail("line counts differ: '", ref_file.string(), "' has ", ref_lines.size(),
         " lines but '", hyp_file.string(), "' has ", hyp_lines.size());
  std::vector<textnorm::NormalizedText> refs, hyps;
  refs.reserve(ref_lines.size());
  hyps.reserve(hyp_lines.size());
  for (const auto& line : ref_lines)
    refs.push_back(textnorm::apply_profile(line, profile, opts));
  for (const auto& line : hyp_lines)
    hyps.push_back(textnorm::apply_profile(line, profile, opts));
  if (metric == "wer") return metrics::wer(refs, hyps);
  if (metric == "cer") return metrics::cer(refs, hyps);
  if (metric == "bleu") return metrics::bleu_report(refs, hyps);
  if (metric == "chrf") return metrics::chrf_report(refs, hyps);
  fail("unknown metric '", std::string(metric),
       "' (valid: wer, cer, bleu, chrf)");
}

namespace detail {

struct NormArgs {
  std::string profile = "iwslt-eval";
  std::string mapping_file;
  std::string in_file;
  std::string out_file;
};

struct ScoreArgs {
  std::string metric;
  std::string ref_file;
  std::string hyp_file;
  std::string profile = "iwslt-eval";
  bool as_json = false;
};

struct MbrArgs {
  std::string pool_a;
  std::string pool_b;
  std::string utility = "bleu";
  std::string weights;
  bool exclude_self = false;
  std::string out_file;
  std::string audit_file;
  std::string profile = "iwslt-eval";
};

struct McdArgs {
  std::string ref_file;
  std::string hyp_file;
  std::string range = "1:25";
  long band_radius = -1;
  bool as_json = false;
};

struct FilterArgs {
  std::string manifest;
  std::optional<double> max_duration;
  std::optional<double> ratio_min;
  std::optional<double> ratio_max;
  std::string out_file;
  std::string report_file;
};

struct AugmentArgs {
  std::string feats_file;
  double sigma = 0.0;
  std::string time_mask;
  std::string freq_mask;
  uint64_t seed = 0;
  std::string out_file;
};

inline std::pair<double, double> parse_weights(const std::string& s) {
  const size_t comma = s.find(',');
  if (comma == std::string::npos)
    fail("--weights expects two comma-separated numbers, got '", s, "'");
  const double wa = numio::parse_double(s.substr(0, comma), "--weights");
  const double wb = numio::parse_double(s.substr(comma + 1), "--weights");
  if (wa < 0.0 || wb < 0.0) fail("--weights values must be >= 0");
  if (wa + wb <= 0.0) fail("--weights values must not both be zero");
  return {wa, wb};
}

inline mcd::CoefRange parse_range(const std::string& s) {
  const size_t colon = s.find(':');
  if (colon == std::string::npos)
    fail("--range expects lo:hi, got '", s, "'");
  const auto parse_index = [&](std::string_view part) {
    const double v = numio::parse_double(part, "--range");
    if (v < 0.0 || v != static_cast<double>(static_cast<size_t>(v)))
      fail("--range indices must be non-negative integers, got '", s, "'");
    return static_cast<size_t>(v);
  };
  mcd::CoefRange r;
  r.lo = parse_index(std::string_view(s).substr(0, colon));
  r.hi = parse_index(std::string_view(s).substr(colon + 1));
  if (r.lo > r.hi) fail("--range lo must be <= hi, got '", s, "'");
  return r;
}

// W,N: maximum mask width and mask count.
inline std::pair<size_t, size_t> parse_mask(const std::string& s,
                                            std::string_view flag) {
  const size_t comma = s.find(',');
  if (comma == std::string::npos)
    fail(flag, " expects WIDTH,COUNT, got '", s, "'");
  const auto parse_count = [&](std::string_view part) {
    const double v = numio::parse_double(part, flag);
    if (v < 0.0 || v != static_cast<double>(static_cast<size_t>(v)))
      fail(flag, " values must be non-negative integers, got '", s, "'");
    return static_cast<size_t>(v);
  };
  return {parse_count(std::string_view(s).substr(0, comma)),
          parse_count(std::string_view(s).substr(comma + 1))};
}

inline textnorm::NormOptions norm_options(const std::string& mapping_file) {
  textnorm::NormOptions opts;
  if (!mapping_file.empty()) {
    std::ifstream in(mapping_file, std::ios::binary);
    if (!in) fail("cannot open '", mapping_file, "' for reading");
    opts.ortho = textnorm::OrthoTable::load(in, mapping_file);
  }
  return opts;
}

inline int run_norm(const NormArgs& args) {
  const auto profile = textnorm::NormProfile::named(args.profile);
  const auto opts = norm_options(args.mapping_file);
  const auto lines = io::read_lines(args.in_file);
  std::string out;
  for (const auto& line : lines) {
    out += textnorm::apply_profile(line, profile, opts).text;
    out += '\n';
  }
  io::write_text_atomic(args.out_file, out);
  return 0;
}

inline int run_score(const ScoreArgs& args) {
  const auto profile = textnorm::NormProfile::named(args.profile);
  const metrics::ScoreReport report =
      pipeline_score(args.ref_file, args.hyp_file, args.metric, profile);
  if (args.as_json) {
    std::cout << report::score_report_json(report).dump(2) << "\n";
    return 0;
  }
  std::cout << "metric: " << report.metric << "\n"
            << "profile: " << report.profile << "\n"
            << "segments: " << report.segment_count << "\n"
            << report.metric << ": " << numio::dtos_fixed(report.corpus_score, 1)
            << "\n";
  if (report.edit) {
    std::cout << "errors: S=" << report.edit->substitutions
              << " D=" << report.edit->deletions
              << " I=" << report.edit->insertions
              << " ref_tokens=" << report.edit->ref_len << "\n";
  }
  if (report.bleu) {
    std::cout << "precisions:";
    for (double p : report.bleu->precisions)
      std::cout << " " << numio::dtos_fixed(100.0 * p, 1);
    std::cout << "\nbrevity_penalty: "
              << numio::dtos_fixed(report.bleu->brevity_penalty, 3)
              << "\nlength_ratio: hyp=" << report.bleu->hyp_len
              << " ref=" << report.bleu->ref_len << "\n";
  }
  if (report.chrf) {
    std::cout << "precision: " << numio::dtos_fixed(100.0 * report.chrf->precision, 1)
              << "\nrecall: " << numio::dtos_fixed(100.0 * report.chrf->recall, 1)
              << "\n";
  }
  return 0;
}

inline int run_mbr(const MbrArgs& args) {
  const auto profile = textnorm::NormProfile::named(args.profile);
  const textnorm::NormOptions opts;
  mbr::CombineOptions options;
  options.utility = mbr::utility_from_name(args.utility);
  options.exclude_self = args.exclude_self;
  if (!args.weights.empty()) {
    const auto [wa, wb] = parse_weights(args.weights);
    options.weight_a = wa;
    options.weight_b = wb;
  }
  options.threads = par::threads_from_env();

  const auto load = [&](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '", path, "' for reading");
    return io::build_pools(io::load_pool_records(in, path), profile, opts, path);
  };
  const auto loaded_a = load(args.pool_a);
  const auto loaded_b = load(args.pool_b);

  std::vector<mbr::HypothesisPool> pools_a, pools_b;
  for (const auto& p : loaded_a) pools_a.push_back(p.pool);
  for (const auto& p : loaded_b) pools_b.push_back(p.pool);
  const auto selections = mbr::mbr_combine_corpus(pools_a, pools_b, options);

  // Map back to the raw (pre-normalization) texts for output. Members of
  // pool_a precede members of pool_b in every merged pool.
  std::map<std::string, const io::LoadedPool*> raw_a, raw_b;
  for (const auto& p : loaded_a) raw_a[p.pool.segment_id] = &p;
  for (const auto& p : loaded_b) raw_b[p.pool.segment_id] = &p;
  std::string out;
  for (const auto& sel : selections) {
    const io::LoadedPool* a = raw_a.at(sel.segment_id);
    const io::LoadedPool* b = raw_b.at(sel.segment_id);
    const size_t na = a->raw_texts.size();
    out += sel.index < na ? a->raw_texts[sel.index]
                          : b->raw_texts[sel.index - na];
    out += '\n';
  }
  io::write_text_atomic(args.out_file, out);
  if (!args.audit_file.empty()) {
    io::write_text_atomic(
        args.audit_file,
        report::mbr_audit_json(selections, options, profile.name).dump(2) + "\n");
  }
  return 0;
}

inline int run_mcd(const McdArgs& args) {
  const auto load = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '", path, "' for reading");
    return feat::load_features_csv(in, path);
  };
  const feat::FeatureSequence ref = load(args.ref_file);
  const feat::FeatureSequence hyp = load(args.hyp_file);
  if (ref.dim != hyp.dim)
    fail("feature dimensions differ: '", args.ref_file, "' has ", ref.dim,
         " columns but '", args.hyp_file, "' has ", hyp.dim);
  const mcd::CoefRange range = parse_range(args.range);
  const mcd::McdResult result =
      mcd::mcd_score(ref, hyp, range, args.band_radius);
  if (args.as_json) {
    std::cout << report::mcd_report_json(result, ref.frames(), hyp.frames()).dump(2)
              << "\n";
  } else {
    std::cout << "mcd_db: " << numio::dtos_fixed(result.mcd_db, 1) << "\n"
              << "frames: ref=" << ref.frames() << " hyp=" << hyp.frames()
              << " path=" << result.path.pairs.size() << "\n";
  }
  return 0;
}

inline int run_filter(const FilterArgs& args) {
  std::ifstream in(args.manifest, std::ios::binary);
  if (!in) fail("cannot open '", args.manifest, "' for reading");
  std::vector<datakit::SampleRecord> records =
      io::load_manifest(in, args.manifest);

  datakit::FilterReport merged;
  merged.input_count = records.size();
  if (args.max_duration) {
    auto result = datakit::filter_duration(records, *args.max_duration);
    records = std::move(result.records);
    for (const auto& [rule, n] : result.report.dropped_by_rule)
      merged.dropped_by_rule[rule] += n;
    for (const auto& [rule, n] : result.report.flagged) merged.flagged[rule] += n;
  }
  if (args.ratio_min) {
    auto result =
        datakit::filter_length_ratio(records, *args.ratio_min, *args.ratio_max);
    records = std::move(result.records);
    for (const auto& [rule, n] : result.report.dropped_by_rule)
      merged.dropped_by_rule[rule] += n;
    for (const auto& [rule, n] : result.report.flagged) merged.flagged[rule] += n;
  }
  merged.kept = records.size();

  io::write_text_atomic(args.out_file, io::manifest_to_jsonl(records));
  io::write_text_atomic(args.report_file,
                        report::filter_report_json(merged).dump(2) + "\n");
  std::cout << "kept " << merged.kept << "/" << merged.input_count << "\n";
  return 0;
}

inline int run_augment(const AugmentArgs& args) {
  std::ifstream in(args.feats_file, std::ios::binary);
  if (!in) fail("cannot open '", args.feats_file, "' for reading");
  feat::FeatureSequence feats = feat::load_features_csv(in, args.feats_file);
  // Stage order: Gaussian noise (seed), then masking (seed + 1).
  if (args.sigma > 0.0)
    feats = datakit::add_gaussian_noise(feats, args.sigma, args.seed);
  if (!args.time_mask.empty() || !args.freq_mask.empty()) {
    size_t t_width = 0, t_count = 0, f_width = 0, f_count = 0;
    if (!args.time_mask.empty())
      std::tie(t_width, t_count) = parse_mask(args.time_mask, "--time-mask");
    if (!args.freq_mask.empty())
      std::tie(f_width, f_count) = parse_mask(args.freq_mask, "--freq-mask");
    feats = datakit::spec_mask(feats, t_width, f_width, t_count, f_count,
                               args.seed + 1);
  }
  std::ostringstream out;
  feat::write_features_csv(out, feats);
  io::write_text_atomic(args.out_file, out.str());
  return 0;
}

}  // namespace detail

// Runs the CLI on `argv` (program name excluded). Returns the process exit
// code; diagnostics go to stderr.
inline int run(const std::vector<std::string>& argv) {
  CLI::App app{"speech-translation evaluation toolkit: normalization, "
               "scoring, MBR combination, MCD, data filtering"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value file mirroring the flags");
  app.get_config_ptr()->configurable(false);

  const std::vector<std::string> profiles = {"iwslt-eval", "apc", "aeb", "none"};

  detail::NormArgs norm;
  CLI::App* norm_cmd = app.add_subcommand("norm", "normalize a line file");
  norm_cmd->add_option("--profile", norm.profile, "normalization profile")
      ->check(CLI::IsMember(profiles));
  norm_cmd->add_option("--mapping", norm.mapping_file,
                       "tab-separated pattern/replacement table replacing the "
                       "default orthographic rules");
  norm_cmd->add_option("--in", norm.in_file, "input file, one sentence per line")
      ->required();
  norm_cmd->add_option("--out", norm.out_file, "output file")->required();

  detail::ScoreArgs score;
  CLI::App* score_cmd = app.add_subcommand("score", "score hypotheses against references");
  score_cmd->add_option("--metric", score.metric, "metric")
      ->required()
      ->check(CLI::IsMember({"wer", "cer", "bleu", "chrf"}));
  score_cmd->add_option("--ref", score.ref_file, "reference line file")->required();
  score_cmd->add_option("--hyp", score.hyp_file, "hypothesis line file")->required();
  score_cmd->add_option("--profile", score.profile, "normalization profile")
      ->check(CLI::IsMember(profiles));
  score_cmd->add_flag("--json", score.as_json, "print the full JSON report");

  detail::MbrArgs mbr_args;
  CLI::App* mbr_cmd = app.add_subcommand(
      "mbr", "MBR-combine two hypothesis pool files (JSON-lines)");
  mbr_cmd->add_option("--pool-a", mbr_args.pool_a, "first pool file (e.g. cascaded)")
      ->required();
  mbr_cmd->add_option("--pool-b", mbr_args.pool_b, "second pool file (e.g. e2e)")
      ->required();
  mbr_cmd->add_option("--utility", mbr_args.utility, "utility function")
      ->check(CLI::IsMember({"bleu", "chrf"}));
  mbr_cmd->add_option("--weights", mbr_args.weights,
                      "per-system weights wa,wb (default uniform)");
  mbr_cmd->add_flag("--exclude-self", mbr_args.exclude_self,
                    "drop the self term from expected utility");
  mbr_cmd->add_option("--out", mbr_args.out_file, "selected translations, one per line")
      ->required();
  mbr_cmd->add_option("--audit", mbr_args.audit_file,
                      "optional JSON audit file with expected utilities");
  mbr_cmd->add_option("--profile", mbr_args.profile,
                      "normalization applied before utility computation")
      ->check(CLI::IsMember(profiles));

  detail::McdArgs mcd_args;
  CLI::App* mcd_cmd = app.add_subcommand(
      "mcd", "mel-cepstral distortion between two feature CSV files");
  mcd_cmd->add_option("--ref", mcd_args.ref_file, "reference feature CSV")->required();
  mcd_cmd->add_option("--hyp", mcd_args.hyp_file, "hypothesis feature CSV")->required();
  mcd_cmd->add_option("--range", mcd_args.range,
                      "coefficient range lo:hi (default 1:25, excludes energy)");
  mcd_cmd->add_option("--band-radius", mcd_args.band_radius,
                      "Sakoe-Chiba band radius (default: unconstrained)")
      ->check(CLI::NonNegativeNumber);
  mcd_cmd->add_flag("--json", mcd_args.as_json, "print the full JSON report");

  detail::FilterArgs filter;
  CLI::App* filter_cmd =
      app.add_subcommand("filter", "filter a JSON-lines sample manifest");
  filter_cmd->add_option("--manifest", filter.manifest, "input manifest")->required();
  filter_cmd->add_option("--max-duration", filter.max_duration,
                         "drop records with duration_secs strictly above this");
  auto* ratio_min_opt = filter_cmd->add_option(
      "--ratio-min", filter.ratio_min, "lower audio-to-text length ratio bound");
  auto* ratio_max_opt = filter_cmd->add_option(
      "--ratio-max", filter.ratio_max, "upper audio-to-text length ratio bound");
  ratio_min_opt->needs(ratio_max_opt);
  ratio_max_opt->needs(ratio_min_opt);
  filter_cmd->add_option("--out", filter.out_file, "filtered manifest")->required();
  filter_cmd->add_option("--report", filter.report_file, "JSON filter report")
      ->required();

  detail::AugmentArgs augment;
  CLI::App* augment_cmd =
      app.add_subcommand("augment", "augment a feature CSV file");
  augment_cmd->add_option("--feats", augment.feats_file, "input feature CSV")
      ->required();
  augment_cmd->add_option("--sigma", augment.sigma,
                          "Gaussian noise standard deviation")
      ->check(CLI::NonNegativeNumber);
  augment_cmd->add_option("--time-mask", augment.time_mask,
                          "time masking as MAX_WIDTH,COUNT");
  augment_cmd->add_option("--freq-mask", augment.freq_mask,
                          "frequency masking as MAX_WIDTH,COUNT");
  augment_cmd->add_option("--seed", augment.seed, "random seed")->required();
  augment_cmd->add_option("--out", augment.out_file, "output feature CSV")
      ->required();

  try {
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(norm_cmd)) return detail::run_norm(norm);
    if (app.got_subcommand(score_cmd)) return detail::run_score(score);
    if (app.got_subcommand(mbr_cmd)) return detail::run_mbr(mbr_args);
    if (app.got_subcommand(mcd_cmd)) return detail::run_mcd(mcd_args);
    if (app.got_subcommand(filter_cmd)) return detail::run_filter(filter);
    if (app.got_subcommand(augment_cmd)) return detail::run_augment(augment);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mbrfuse::cli
