// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#include "commands.hpp"

#include <charconv>
#include <fstream>

#include "iwr/dataset.hpp"
#include "iwr/error.hpp"
#include "iwr/parallel.hpp"
#include "iwr/synthbench.hpp"

namespace iwr::cli {

namespace {

namespace fs = std::filesystem;

void require_input(const fs::path& path, const char* flag) {
  if (path.empty()) throw Error(ErrorCode::kInvalidArgument, std::string(flag) + " is required");
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(flag) + " path does not exist: " + path.string());
  }
}

void require_output(const fs::path& path, const char* flag) {
  if (path.empty()) throw Error(ErrorCode::kInvalidArgument, std::string(flag) + " is required");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

void validate_scoring_inputs(const RunConfig& c) {
  require_input(c.target, "--target");
  require_input(c.prior, "--prior");
  if (c.method == ScoreMethod::kIwr && !c.seed) {
    throw Error(ErrorCode::kInvalidArgument, "--seed is required for method iwr");
  }
  if (!(c.bandwidth_scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "--bandwidth-scale must be positive");
}

void validate_selection(const RunConfig& c) {
  const int rules = static_cast<int>(c.fraction.has_value()) + static_cast<int>(c.threshold.has_value()) +
                    static_cast<int>(c.resample_count.has_value());
  if (rules != 1) {
    throw Error(ErrorCode::kInvalidArgument, "exactly one of --fraction, --threshold, --resample is required");
  }
  if (c.fraction) fraction_count(*c.fraction, 1);  // range check only
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "--alpha must lie in (0, 1)");
}

std::optional<std::vector<RowMetadata>> load_meta_for(const RunConfig& c, const EmbeddingDataset& prior) {
  if (c.meta.empty()) return std::nullopt;
  auto meta = load_metadata(c.meta);
  validate_pairing(prior, meta);
  return meta;
}

RetrievalManifest select(const RunConfig& c, const ScoreVector& scores) {
  if (c.fraction) return select_by_fraction(scores, *c.fraction);
  if (c.threshold) return select_by_threshold(scores, *c.threshold);
  return resample_by_weight(scores, *c.resample_count, c.seed.value_or(0), c.with_replacement);
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

ScoringConfig scoring_config(const RunConfig& c, std::size_t prior_rows) {
  ScoringConfig s;
  s.method = c.method;
  s.bandwidth.scale_c = c.bandwidth_scale;
  s.lse_temperature = c.lse_temperature;
  s.batches = default_batch_spec(prior_rows, c.seed.value_or(0));
  if (c.batch_size) s.batches.batch_size = *c.batch_size;
  s.batches.num_batches = c.num_batches;
  s.leave_self_out = c.leave_self_out;
  return s;
}

std::string cmd_score(const RunConfig& c, std::ostream& log) {
  validate_scoring_inputs(c);
  require_output(c.out, "--out");
  const EmbeddingDataset target = load_embeddings(c.target);
  const EmbeddingDataset prior = load_embeddings(c.prior);
  const ScoreVector scores = compute_scores(scoring_config(c, prior.rows()), target, prior, c.threads);
  if (c.out.has_parent_path()) ensure_dir(c.out.parent_path());
  save_scores(scores, c.out);
  log << "method " << to_string(scores.method) << ", " << scores.values.size()
      << " scores -> " << c.out.string() << "\nfingerprint " << scores.config_fingerprint << '\n';
  return scores.config_fingerprint;
}

RetrieveOutputs cmd_retrieve(const RunConfig& c, std::ostream& log) {
  validate_scoring_inputs(c);
  require_input(c.scores, "--scores");
  if (!c.meta.empty()) require_input(c.meta, "--meta");
  require_output(c.out, "--out");
  validate_selection(c);

  const EmbeddingDataset target = load_embeddings(c.target);
  const EmbeddingDataset prior = load_embeddings(c.prior);
  const ScoreVector scores = load_scores(c.scores);
  const std::string expected =
      config_fingerprint(scoring_config(c, prior.rows()), target.source_id(), prior.source_id());
  if (scores.config_fingerprint != expected) {
    throw Error(ErrorCode::kFingerprintMismatch,
                c.scores.string() + " has fingerprint " + scores.config_fingerprint +
                    " but the configuration and inputs give " + expected + " (stale scores?)");
  }
  if (scores.values.size() != prior.rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "score count differs from prior rows");
  }
  const auto meta = load_meta_for(c, prior);

  const RetrievalManifest manifest = select(c, scores);
  const RetrievedData data = materialize(manifest, prior, meta ? &*meta : nullptr);
  const CotrainWeights weights = cotrain_weights(target.rows(), retrieved_sample_count(manifest), c.alpha);

  ensure_dir(c.out);
  RetrieveOutputs out{c.out / "manifest.json", c.out / "retrieved.bin", {}, c.out / "weights.csv"};
  save_manifest(manifest, out.manifest);
  save_embeddings(data.rows, out.retrieved);
  if (data.meta) {
    out.retrieved_meta = c.out / "retrieved_meta.csv";
    save_metadata(*data.meta, out.retrieved_meta);
  }
  save_weights(manifest, weights, target.rows(), out.weights);
  log << "selected " << manifest.selected_indices.size() << " of " << prior.rows() << " prior rows ("
      << to_string(manifest.rule) << " " << format_number(manifest.rule_param) << ") -> "
      << out.manifest.string() << '\n';
  return out;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& c, const std::vector<double>& fractions,
                                const std::vector<double>& bandwidth_scales, std::ostream& log) {
  validate_scoring_inputs(c);
  require_output(c.out, "--out");
  if (fractions.empty()) throw Error(ErrorCode::kInvalidArgument, "--fractions needs at least one value");
  for (double f : fractions) fraction_count(f, 1);
  if (!c.labels.empty()) require_input(c.labels, "--labels");
  if (!c.meta.empty()) require_input(c.meta, "--meta");

  const EmbeddingDataset target = load_embeddings(c.target);
  const EmbeddingDataset prior = load_embeddings(c.prior);
  const auto meta = load_meta_for(c, prior);
  std::optional<std::vector<bool>> relevant;
  if (meta && !c.labels.empty()) relevant = relevant_rows(*meta, load_relevance_labels(c.labels));

  std::vector<double> scales = bandwidth_scales;
  if (scales.empty()) scales.push_back(c.bandwidth_scale);

  ensure_dir(c.out);
  std::vector<SweepRow> rows;
  for (double scale : scales) {
    RunConfig run = c;
    run.bandwidth_scale = scale;
    const ScoreVector scores = compute_scores(scoring_config(run, prior.rows()), target, prior, c.threads);
    const fs::path dir = scales.size() > 1 ? c.out / ("c" + format_number(scale)) : c.out;
    ensure_dir(dir);
    save_scores(scores, dir / "scores.bin");
    for (double f : fractions) {
      const RetrievalManifest manifest = select_by_fraction(scores, f);
      SweepRow row{scale, f, manifest.selected_indices.size(), std::nullopt,
                   dir / ("manifest_f" + format_number(f) + ".json")};
      save_manifest(manifest, row.manifest);
      if (relevant) row.quality = evaluate_retrieval(manifest, *relevant);
      rows.push_back(std::move(row));
    }
  }

  std::ofstream summary(c.out / "summary.csv", std::ios::trunc);
  if (!summary) throw Error(ErrorCode::kIo, "cannot write " + (c.out / "summary.csv").string());
  summary.precision(17);
  summary << "method,bandwidth_scale,fraction,selected,precision,recall\n";
  for (const SweepRow& r : rows) {
    summary << to_string(c.method) << ',' << format_number(r.bandwidth_scale) << ','
            << format_number(r.fraction) << ',' << r.selected << ',';
    if (r.quality) summary << r.quality->precision << ',' << r.quality->recall;
    else summary << ',';
    summary << '\n';
    log << "c=" << format_number(r.bandwidth_scale) << " f=" << format_number(r.fraction) << ": "
        << r.selected << " rows";
    if (r.quality) log << ", precision " << r.quality->precision;
    log << '\n';
  }
  if (!summary) throw Error(ErrorCode::kIo, "write failed for summary.csv");
  return rows;
}

AnalysisReport cmd_analyze(const RunConfig& c, std::ostream& log) {
  require_input(c.manifest, "--manifest");
  require_input(c.meta, "--meta");
  if (!c.labels.empty()) require_input(c.labels, "--labels");
  require_output(c.out, "--out");
  if (c.bins < 1) throw Error(ErrorCode::kInvalidArgument, "--bins must be >= 1");

  const RetrievalManifest manifest = load_manifest(c.manifest);
  const std::vector<RowMetadata> meta = load_metadata(c.meta);
  const RelevanceLabels labels = c.labels.empty() ? RelevanceLabels{} : load_relevance_labels(c.labels);
  AnalysisReport report = build_report(manifest, meta, labels, c.bins);
  if (!c.labels.empty()) report.ground_truth = evaluate_retrieval(manifest, relevant_rows(meta, labels));
  for (const std::string& w : report.tasks.warnings) log << "warning: " << w << '\n';
  if (c.out.has_parent_path()) ensure_dir(c.out.parent_path());
  emit_report(report, c.out);
  log << "report for " << report.selection_size << " selected rows -> " << c.out.string() << '\n';
  return report;
}

void cmd_synth(const SynthRequest& r, std::ostream& log) {
  require_output(r.out_dir, "--out");
  const ScenarioId id = parse_scenario_id(r.scenario);
  const SyntheticScenario scenario = make_scenario(id, r.seed, r.dim);
  std::size_t n_target = 200;
  std::size_t n_prior = 4000;
  if (id == ScenarioId::kFig2Toy) {
    n_target = 9;
    n_prior = 66;
  } else if (id == ScenarioId::kGaussianRatio) {
    n_target = 10000;
    n_prior = 10000;
  }
  const SyntheticData data = generate(scenario, r.n_target.value_or(n_target), r.n_prior.value_or(n_prior));
  ensure_dir(r.out_dir);
  save_embeddings(data.target, r.out_dir / "target.bin");
  save_embeddings(data.prior, r.out_dir / "prior.bin");
  save_metadata(data.prior_meta, r.out_dir / "prior_meta.csv");
  save_relevance_labels(data.labels, r.out_dir / "labels.json");
  save_oracle_parameters(scenario, data, r.out_dir / "oracle.json");
  log << to_string(id) << ": " << data.target.rows() << " target, " << data.prior.rows()
      << " prior rows -> " << r.out_dir.string() << '\n';
}

}  // namespace iwr::cli
