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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "iwr/analysis.hpp"
#include "iwr/dataset.hpp"
#include "iwr/random.hpp"
#include "iwr/retrieval.hpp"
#include "iwr/scoring.hpp"

namespace iwr {

struct GaussianComponent {
  std::string name;
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Relevance relevance = Relevance::kRelevant;
};

/// Finite Gaussian mixture with exact log density. Validated on
/// construction: weights sum to 1 within 1e-12, covariances positive
/// definite, shapes consistent.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<GaussianComponent> components);

  const std::vector<GaussianComponent>& components() const { return components_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return components_.empty(); }

  double log_pdf(std::span<const double> x) const;
  /// Draws one row; returns the component index.
  std::size_t sample(Rng& rng, double* out) const;

 private:
  std::vector<GaussianComponent> components_;
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<double> log_norm_;
  std::size_t dim_ = 0;
};

/// Exact densities of the generating mixtures.
struct OracleDensities {
  GaussianMixture target;
  GaussianMixture prior;

  double log_target(std::span<const double> x) const { return target.log_pdf(x); }
  double log_prior(std::span<const double> x) const { return prior.log_pdf(x); }
  double log_ratio(std::span<const double> x) const { return log_target(x) - log_prior(x); }
};

enum class ScenarioId { kFig2Toy, kGaussianRatio, kClusterBias };

std::string_view to_string(ScenarioId id);
ScenarioId parse_scenario_id(std::string_view name);

struct SyntheticScenario {
  ScenarioId id = ScenarioId::kGaussianRatio;
  std::size_t dim = 1;
  GaussianMixture target_spec;
  GaussianMixture prior_spec;
  std::uint64_t rng_seed = 0;
};

/// gaussian_ratio: target N(0, I), prior N(0, 4I) in `dim` dimensions.
/// cluster_bias (d = 2): target N(0, I); prior is 25% N(0, I) (relevant),
///   60% a tight harmful cluster N((1.5, 0), 0.25^2 I) on the target's fringe,
///   15% a far harmful cluster N((0, -5), I).
/// fig2_toy (d = 2): no mixtures; see generate().
SyntheticScenario make_scenario(ScenarioId id, std::uint64_t seed, std::size_t dim = 0);

/// Frozen fig2_toy geometry chosen by the constructor's search.
struct Fig2Geometry {
  double arc_radius = 1.0;
  double outlier_distance = 2.0;
  double probe_offset = 0.25;
  std::size_t arc_points = 8;
};

struct SyntheticData {
  EmbeddingDataset target;
  EmbeddingDataset prior;
  std::vector<RowMetadata> prior_meta;
  std::vector<bool> prior_relevant;
  RelevanceLabels labels;
  std::optional<OracleDensities> oracle;
  /// fig2_toy only: prior rows of the cluster-adjacent and isolated probes.
  std::optional<std::size_t> cluster_probe;
  std::optional<std::size_t> isolated_probe;
  std::optional<Fig2Geometry> fig2;
};

inline constexpr std::int64_t kSyntheticEpisodeLength = 50;

/// Seeded, reproducible sample of a scenario. Prior rows are grouped by
/// generating component (task label = component name) and cut into episodes
/// of kSyntheticEpisodeLength steps.
///
/// fig2_toy ignores the mixtures: the target is an arc of max(8, n_target - 1)
/// points plus one outlying point; the prior holds the cluster-adjacent probe
/// (row 0), the isolated probe next to the outlier (row 1) and n_prior - 2
/// broad background rows. Throws if no geometry in the search family puts the
/// two probes in opposite order under nn_l2 and the density scorers.
SyntheticData generate(const SyntheticScenario& scenario, std::size_t n_target, std::size_t n_prior);

/// Geometries tried, in order, by the fig2_toy constructor.
std::vector<Fig2Geometry> fig2_search_family();

/// precision = |relevant and selected| / |selected|,
/// recall = |relevant and selected| / |relevant|; 0 when a denominator is 0.
RetrievalQuality evaluate_retrieval(const RetrievalManifest& manifest, const std::vector<bool>& relevant);

/// Per-row relevance from metadata task labels: relevant iff the row's task
/// maps to Relevance::kRelevant.
std::vector<bool> relevant_rows(std::span<const RowMetadata> meta, const RelevanceLabels& labels);

struct WeightErrorStats {
  double mean_abs_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t evaluated = 0;
};

/// Compares estimated iwr log ratios to the oracle log ratio on queries
/// whose oracle log p_prior is at or above the 10th percentile over queries.
WeightErrorStats oracle_weight_check(const OracleDensities& oracle, const ScoreVector& estimated,
                                     const EmbeddingDataset& queries);

/// Oracle parameters as JSON (scenario id, seed, both mixtures, fig2 probes).
void save_oracle_parameters(const SyntheticScenario& scenario, const SyntheticData& data,
                            const std::filesystem::path& path);

}  // namespace iwr
