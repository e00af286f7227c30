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
#include <vector>

#include "iwr/dataset.hpp"
#include "iwr/scoring.hpp"

namespace iwr {

enum class SelectionRule { kFraction, kThreshold, kResample };

std::string_view to_string(SelectionRule rule);

/// The persisted result of a retrieval. selected_indices is strictly
/// increasing; scores_at_selection is parallel to it. multiplicities is only
/// filled for resampling with replacement.
struct RetrievalManifest {
  std::vector<std::size_t> selected_indices;
  std::vector<double> scores_at_selection;
  std::vector<std::size_t> multiplicities;
  SelectionRule rule = SelectionRule::kFraction;
  double rule_param = 0.0;
  std::uint64_t rng_seed = 0;
  ScoreMethod method = ScoreMethod::kNnL2;
  std::size_t prior_rows = 0;
  std::string config_fingerprint;
  std::string prior_source_id;
  std::string target_source_id;

  friend bool operator==(const RetrievalManifest&, const RetrievalManifest&) = default;
};

/// Number of rows a fraction selects: round(f * N).
std::size_t fraction_count(double fraction, std::size_t rows);

/// Top round(f * N) scores; equal scores go to the lower index. Throws
/// kInvalidArgument for f outside (0, 1] or when the count rounds to zero.
RetrievalManifest select_by_fraction(const ScoreVector& scores, double fraction);

/// Every index with score >= threshold. May be empty.
RetrievalManifest select_by_threshold(const ScoreVector& scores, double threshold);

/// Draws indices with probability proportional to exp(score). Requires
/// log-space scores. Without replacement this is successive sampling
/// (Gumbel top-k); with replacement, repeated draws are folded into
/// multiplicities.
RetrievalManifest resample_by_weight(const ScoreVector& scores, std::size_t sample_count,
                                     std::uint64_t rng_seed, bool with_replacement);

inline constexpr double kDefaultAlpha = 0.5;

/// Per-sample weights of the co-training objective: alpha/|D_t| for target
/// rows and (1 - alpha)/|D_ret| for retrieved rows.
struct CotrainWeights {
  double target_weight_per_sample = 0.0;
  double retrieved_weight_per_sample = 0.0;
  double alpha = kDefaultAlpha;
};

CotrainWeights cotrain_weights(std::size_t target_count, std::size_t retrieved_count,
                               double alpha = kDefaultAlpha);

/// Number of retrieved samples, counting resampling multiplicities.
std::size_t retrieved_sample_count(const RetrievalManifest& manifest);

struct RetrievedData {
  EmbeddingDataset rows;
  std::optional<std::vector<RowMetadata>> meta;
};

RetrievedData materialize(const RetrievalManifest& manifest, const EmbeddingDataset& prior,
                          const std::vector<RowMetadata>* prior_meta = nullptr);

/// Throws kIndexOutOfRange / kInvalidArgument on broken ordering or bounds.
void validate_manifest(const RetrievalManifest& manifest);

void save_manifest(const RetrievalManifest& manifest, const std::filesystem::path& path);
RetrievalManifest load_manifest(const std::filesystem::path& path);

/// CSV "dataset,index,weight": one row per target sample, then one per
/// retrieved prior row (weight scaled by multiplicity). Weights sum to 1.
void save_weights(const RetrievalManifest& manifest, const CotrainWeights& weights,
                  std::size_t target_count, const std::filesystem::path& path);

}  // namespace iwr
