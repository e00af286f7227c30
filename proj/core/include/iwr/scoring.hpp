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
#include <string>
#include <string_view>
#include <vector>

#include "iwr/dataset.hpp"
#include "iwr/kde.hpp"

namespace iwr {

enum class ScoreMethod { kNnL2, kLse, kKdeTarget, kIwr };

std::string_view to_string(ScoreMethod method);
/// Accepts the canonical names (nn_l2, lse, kde_target, iwr) and the short
/// CLI aliases (nn, kde).
ScoreMethod parse_score_method(std::string_view name);
/// kde_target and iwr scores are log densities / log ratios.
bool is_log_space(ScoreMethod method);

struct PriorBatchSpec {
  std::size_t batch_size = 4096;
  std::size_t num_batches = 8;
  std::uint64_t rng_seed = 0;
};

/// B = min(4096, N_prior), K = 8.
PriorBatchSpec default_batch_spec(std::size_t prior_rows, std::uint64_t seed);

struct ScoringConfig {
  ScoreMethod method = ScoreMethod::kIwr;
  BandwidthSpec bandwidth;
  /// LSE temperature; unset means the target KDE's Scott bandwidth.
  std::optional<double> lse_temperature;
  PriorBatchSpec batches;
  bool leave_self_out = false;
};

/// Stable hash of the scoring configuration and both dataset ids.
std::string config_fingerprint(const ScoringConfig& config, std::string_view target_id,
                               std::string_view prior_id);

/// Per-prior-row scores, higher means more retrievable.
struct ScoreVector {
  std::vector<double> values;
  ScoreMethod method = ScoreMethod::kNnL2;
  bool log_space = false;
  std::string config_fingerprint;
  std::string target_source_id;
  std::string prior_source_id;
  ScoringConfig config;
};

/// values[i] = -min_j ||prior_i - target_j||^2.
ScoreVector score_nn_l2(const EmbeddingDataset& target, const EmbeddingDataset& prior,
                        unsigned threads = 0);

/// values[i] = (1/h^2) log sum_j exp(-||prior_i - target_j||^2 / h^2).
ScoreVector score_lse(const EmbeddingDataset& target, const EmbeddingDataset& prior,
                      double temperature, unsigned threads = 0);

/// values[i] = log p_t(prior_i).
ScoreVector score_kde_target(const GaussianKde& target_kde, const EmbeddingDataset& prior,
                             unsigned threads = 0);

/// One KDE fitted on a random subset of prior rows. `indices` are sorted.
struct PriorBatch {
  std::vector<std::size_t> indices;
  GaussianKde kde;
};

/// K batches, each a uniform sample of B distinct rows drawn with a seeded
/// mt19937_64; each batch's bandwidth uses M = B. With B = N every batch is
/// the full prior in its original order.
std::vector<PriorBatch> fit_prior_batched(const EmbeddingDataset& prior, const PriorBatchSpec& spec,
                                          const BandwidthSpec& bandwidth);

/// Only the sampling step of fit_prior_batched.
std::vector<std::vector<std::size_t>> sample_prior_batches(std::size_t prior_rows,
                                                           const PriorBatchSpec& spec);

struct ImportanceOptions {
  /// Drop a prior row's own kernel from any batch that contains it.
  bool leave_self_out = false;
  unsigned threads = 0;
};

/// values[i] = log p_t(prior_i) - log mean_k p_k(prior_i), where p_k are the
/// batch KDEs. The batch mean is taken over densities (log-mean-exp).
ScoreVector score_importance_weight(const GaussianKde& target_kde,
                                    const std::vector<PriorBatch>& prior_batches,
                                    const EmbeddingDataset& prior,
                                    const ImportanceOptions& options = {});

/// Fits whatever the method needs and scores every prior row.
ScoreVector compute_scores(const ScoringConfig& config, const EmbeddingDataset& target,
                           const EmbeddingDataset& prior, unsigned threads = 0);

/// Score file: embedding binary format with d = 1, plus a JSON sidecar at
/// `<path>.json` holding method, fingerprint and parameters.
void save_scores(const ScoreVector& scores, const std::filesystem::path& path);
ScoreVector load_scores(const std::filesystem::path& path);
std::filesystem::path score_sidecar_path(const std::filesystem::path& path);

}  // namespace iwr
