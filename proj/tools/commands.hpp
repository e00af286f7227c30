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
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "iwr/analysis.hpp"
#include "iwr/retrieval.hpp"
#include "iwr/scoring.hpp"

namespace iwr::cli {

/// Everything a pipeline command needs. Paths left empty are unused by the
/// command at hand.
struct RunConfig {
  ScoreMethod method = ScoreMethod::kIwr;
  double bandwidth_scale = 4.0;
  std::optional<double> lse_temperature;
  std::optional<std::size_t> batch_size;
  std::size_t num_batches = 8;
  std::optional<std::uint64_t> seed;
  bool leave_self_out = false;

  std::optional<double> fraction;
  std::optional<double> threshold;
  std::optional<std::size_t> resample_count;
  bool with_replacement = false;

  double alpha = kDefaultAlpha;
  std::size_t bins = kDefaultBinCount;
  unsigned threads = 0;

  std::filesystem::path target;
  std::filesystem::path prior;
  std::filesystem::path meta;
  std::filesystem::path labels;
  std::filesystem::path scores;
  std::filesystem::path manifest;
  std::filesystem::path out;
};

/// The scoring half of a RunConfig, resolved against the prior size
/// (batch size defaults to min(4096, N_prior)).
ScoringConfig scoring_config(const RunConfig& config, std::size_t prior_rows);

/// Writes the score file and sidecar to config.out; returns the fingerprint.
std::string cmd_score(const RunConfig& config, std::ostream& log);

struct RetrieveOutputs {
  std::filesystem::path manifest;
  std::filesystem::path retrieved;
  std::filesystem::path retrieved_meta;
  std::filesystem::path weights;
};

/// Selects from config.scores (checked against the fingerprint recomputed
/// from config and the input files) and writes manifest.json, retrieved.bin,
/// retrieved_meta.csv (with --meta) and weights.csv under config.out.
RetrieveOutputs cmd_retrieve(const RunConfig& config, std::ostream& log);

struct SweepRow {
  double bandwidth_scale = 0.0;
  double fraction = 0.0;
  std::size_t selected = 0;
  std::optional<RetrievalQuality> quality;
  std::filesystem::path manifest;
};

/// Scores once per bandwidth scale and writes one manifest per fraction plus
/// summary.csv under config.out.
std::vector<SweepRow> cmd_sweep(const RunConfig& config, const std::vector<double>& fractions,
                                const std::vector<double>& bandwidth_scales, std::ostream& log);

/// Report for config.manifest + config.meta (+ config.labels) at config.out.
AnalysisReport cmd_analyze(const RunConfig& config, std::ostream& log);

struct SynthRequest {
  std::string scenario;
  /// Unset counts fall back to per-scenario defaults: fig2_toy 9/66,
  /// gaussian_ratio 10000/10000, cluster_bias 200/4000.
  std::optional<std::size_t> n_target;
  std::optional<std::size_t> n_prior;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};

/// Writes target.bin, prior.bin, prior_meta.csv, labels.json, oracle.json.
void cmd_synth(const SynthRequest& request, std::ostream& log);

/// Shortest round-trip decimal, used in sweep file names.
std::string format_number(double value);

}  // namespace iwr::cli
