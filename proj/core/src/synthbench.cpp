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
#include "iwr/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Cholesky>

#include "json.hpp"

#include "iwr/error.hpp"
#include "iwr/kde.hpp"
#include "iwr/numeric.hpp"

namespace iwr {

namespace {

GaussianComponent isotropic(std::string name, double weight, Eigen::VectorXd mean, double variance,
                            Relevance relevance) {
  const auto d = mean.size();
  return {std::move(name), weight, std::move(mean), variance * Eigen::MatrixXd::Identity(d, d), relevance};
}

Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

nlohmann::ordered_json mixture_to_json(const GaussianMixture& mixture) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const GaussianComponent& c : mixture.components()) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["weight"] = c.weight;
    j["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    std::vector<std::vector<double>> cov(static_cast<std::size_t>(c.covariance.rows()));
    for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
      for (Eigen::Index k = 0; k < c.covariance.cols(); ++k) cov[r].push_back(c.covariance(r, k));
    }
    j["covariance"] = cov;
    j["relevance"] = to_string(c.relevance);
    out.push_back(std::move(j));
  }
  return out;
}

RowMatrix sample_rows(const GaussianMixture& mixture, Rng& rng, std::size_t n,
                      std::vector<std::size_t>& components) {
  RowMatrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(mixture.dim()));
  components.resize(n);
  for (std::size_t i = 0; i < n; ++i) components[i] = mixture.sample(rng, rows.data() + i * mixture.dim());
  return rows;
}

struct Fig2Points {
  RowMatrix target;
  RowMatrix prior;
};

Fig2Points fig2_points(const Fig2Geometry& g, std::size_t background, std::uint64_t seed) {
  Fig2Points p;
  const std::size_t narc = g.arc_points;
  p.target.resize(static_cast<Eigen::Index>(narc + 1), 2);
  // Arc opening to the right, centred on the origin where the cluster probe sits.
  const double span = 2.0 * std::numbers::pi / 3.0;
  for (std::size_t i = 0; i < narc; ++i) {
    const double t = narc == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(narc - 1);
    const double angle = std::numbers::pi - span / 2.0 + span * t;
    p.target(static_cast<Eigen::Index>(i), 0) = g.arc_radius * std::cos(angle);
    p.target(static_cast<Eigen::Index>(i), 1) = g.arc_radius * std::sin(angle);
  }
  p.target(static_cast<Eigen::Index>(narc), 0) = g.outlier_distance;
  p.target(static_cast<Eigen::Index>(narc), 1) = 0.0;

  p.prior.resize(static_cast<Eigen::Index>(background + 2), 2);
  p.prior.row(0) << 0.0, 0.0;
  p.prior.row(1) << g.outlier_distance - g.probe_offset * g.arc_radius, 0.0;
  Rng rng(seed);
  const double spread = 3.0 * std::max(g.arc_radius, g.outlier_distance);
  const double mid = 0.5 * (g.outlier_distance - g.probe_offset * g.arc_radius);
  for (std::size_t i = 0; i < background; ++i) {
    const double x = mid + spread * standard_normal(rng);
    const double y = spread * standard_normal(rng);
    p.prior.row(static_cast<Eigen::Index>(i + 2)) << x, y;
  }
  return p;
}

bool fig2_reversal_holds(const EmbeddingDataset& target, const EmbeddingDataset& prior,
                         std::uint64_t seed) {
  const BandwidthSpec bw;
  const ScoreVector nn = score_nn_l2(target, prior, 1);
  if (!(nn.values[1] > nn.values[0])) return false;
  const GaussianKde target_kde = fit_kde(target, bw);
  const ScoreVector kde = score_kde_target(target_kde, prior, 1);
  if (!(kde.values[0] > kde.values[1])) return false;
  const auto batches = fit_prior_batched(prior, default_batch_spec(prior.rows(), seed), bw);
  const ScoreVector iw = score_importance_weight(target_kde, batches, prior, {false, 1});
  if (!(iw.values[0] > iw.values[1])) return false;
  const ScoreVector lse = score_lse(target, prior, target_kde.bandwidth(), 1);
  return lse.values[0] > lse.values[1];
}

SyntheticData generate_fig2(const SyntheticScenario& scenario, std::size_t n_target,
                            std::size_t n_prior) {
  if (n_prior < 2) throw Error(ErrorCode::kInvalidArgument, "fig2_toy needs at least two prior rows");
  for (Fig2Geometry g : fig2_search_family()) {
    g.arc_points = std::max<std::size_t>(8, n_target > 0 ? n_target - 1 : 0);
    Fig2Points pts = fig2_points(g, n_prior - 2, scenario.rng_seed);
    std::string tid = content_id(pts.target, "fig2_target");
    std::string pid = content_id(pts.prior, "fig2_prior");
    EmbeddingDataset target(std::move(pts.target), std::move(tid));
    EmbeddingDataset prior(std::move(pts.prior), std::move(pid));
    if (!fig2_reversal_holds(target, prior, scenario.rng_seed)) continue;

    SyntheticData out{std::move(target), std::move(prior), {}, {}, {}, std::nullopt, 0, 1, g};
    const std::size_t n = out.prior.rows();
    out.prior_meta.resize(n);
    out.prior_relevant.assign(n, false);
    out.prior_relevant[0] = true;
    out.prior_meta[0] = {0, 0, 1, "cluster_probe"};
    out.prior_meta[1] = {1, 0, 1, "isolated_probe"};
    for (std::size_t i = 2; i < n; ++i) {
      const auto offset = static_cast<std::int64_t>(i - 2);
      const std::int64_t bg_len = static_cast<std::int64_t>(n - 2);
      const std::int64_t episode = offset / kSyntheticEpisodeLength;
      const std::int64_t len = std::min(kSyntheticEpisodeLength, bg_len - episode * kSyntheticEpisodeLength);
      out.prior_meta[i] = {2 + episode, offset % kSyntheticEpisodeLength, len, "background"};
    }
    out.labels = {{"cluster_probe", Relevance::kRelevant},
                  {"isolated_probe", Relevance::kHarmful},
                  {"background", Relevance::kHarmful}};
    return out;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "no fig2_toy geometry in the search family reverses the probe ranking");
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw Error(ErrorCode::kInvalidArgument, "mixture has no components");
  dim_ = static_cast<std::size_t>(components_.front().mean.size());
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "mixture components need dim >= 1");
  double total = 0.0;
  for (const GaussianComponent& c : components_) {
    if (static_cast<std::size_t>(c.mean.size()) != dim_ ||
        static_cast<std::size_t>(c.covariance.rows()) != dim_ ||
        static_cast<std::size_t>(c.covariance.cols()) != dim_) {
      throw Error(ErrorCode::kDimensionMismatch, "component '" + c.name + "' has inconsistent shape");
    }
    if (!(c.weight > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "component '" + c.name + "' has non-positive weight");
    }
    total += c.weight;
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kInvalidArgument,
                  "component '" + c.name + "' covariance is not positive definite");
    }
    Eigen::MatrixXd lower = llt.matrixL();
    double log_diag = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) log_diag += std::log(lower(i, i));
    chol_.push_back(std::move(lower));
    log_norm_.push_back(std::log(c.weight) - log_diag -
                        0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi));
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "mixture weights sum to " + std::to_string(total));
  }
}

double GaussianMixture::log_pdf(std::span<const double> x) const {
  if (x.size() != dim_) throw Error(ErrorCode::kDimensionMismatch, "mixture query dimension");
  std::vector<double> terms(components_.size());
  Eigen::VectorXd diff(static_cast<Eigen::Index>(dim_));
  for (std::size_t c = 0; c < components_.size(); ++c) {
    for (std::size_t k = 0; k < dim_; ++k) diff[static_cast<Eigen::Index>(k)] = x[k] - components_[c].mean[static_cast<Eigen::Index>(k)];
    chol_[c].triangularView<Eigen::Lower>().solveInPlace(diff);
    terms[c] = log_norm_[c] - 0.5 * diff.squaredNorm();
  }
  return log_sum_exp(terms);
}

std::size_t GaussianMixture::sample(Rng& rng, double* out) const {
  const double u = uniform01(rng);
  std::size_t chosen = components_.size() - 1;
  double cumulative = 0.0;
  for (std::size_t c = 0; c < components_.size(); ++c) {
    cumulative += components_[c].weight;
    if (u < cumulative) {
      chosen = c;
      break;
    }
  }
  Eigen::VectorXd z(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < dim_; ++k) z[static_cast<Eigen::Index>(k)] = standard_normal(rng);
  const Eigen::VectorXd x = components_[chosen].mean + chol_[chosen] * z;
  for (std::size_t k = 0; k < dim_; ++k) out[k] = x[static_cast<Eigen::Index>(k)];
  return chosen;
}

std::string_view to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::kFig2Toy: return "fig2_toy";
    case ScenarioId::kGaussianRatio: return "gaussian_ratio";
    case ScenarioId::kClusterBias: return "cluster_bias";
  }
  return "unknown";
}

ScenarioId parse_scenario_id(std::string_view name) {
  if (name == "fig2_toy") return ScenarioId::kFig2Toy;
  if (name == "gaussian_ratio") return ScenarioId::kGaussianRatio;
  if (name == "cluster_bias") return ScenarioId::kClusterBias;
  throw Error(ErrorCode::kInvalidArgument, "unknown scenario '" + std::string(name) + "'");
}

SyntheticScenario make_scenario(ScenarioId id, std::uint64_t seed, std::size_t dim) {
  SyntheticScenario s;
  s.id = id;
  s.rng_seed = seed;
  switch (id) {
    case ScenarioId::kGaussianRatio: {
      s.dim = dim == 0 ? 1 : dim;
      const auto d = static_cast<Eigen::Index>(s.dim);
      s.target_spec = GaussianMixture({isotropic("target", 1.0, Eigen::VectorXd::Zero(d), 1.0, Relevance::kRelevant)});
      s.prior_spec = GaussianMixture({isotropic("prior", 1.0, Eigen::VectorXd::Zero(d), 4.0, Relevance::kRelevant)});
      break;
    }
    case ScenarioId::kClusterBias:
      if (dim != 0 && dim != 2) throw Error(ErrorCode::kInvalidArgument, "cluster_bias is two-dimensional");
      s.dim = 2;
      s.target_spec = GaussianMixture({isotropic("target", 1.0, vec2(0.0, 0.0), 1.0, Relevance::kRelevant)});
      s.prior_spec = GaussianMixture({
          isotropic("relevant", 0.25, vec2(0.0, 0.0), 1.0, Relevance::kRelevant),
          isotropic("fringe_cluster", 0.60, vec2(1.5, 0.0), 0.0625, Relevance::kHarmful),
          isotropic("far_cluster", 0.15, vec2(0.0, -5.0), 1.0, Relevance::kHarmful),
      });
      break;
    case ScenarioId::kFig2Toy:
      if (dim != 0 && dim != 2) throw Error(ErrorCode::kInvalidArgument, "fig2_toy is two-dimensional");
      s.dim = 2;
      break;
  }
  return s;
}

std::vector<Fig2Geometry> fig2_search_family() {
  std::vector<Fig2Geometry> family;
  for (double distance : {2.0, 1.5, 3.0, 4.0}) {
    for (double offset : {0.25, 0.1, 0.5}) family.push_back({1.0, distance, offset, 8});
  }
  return family;
}

SyntheticData generate(const SyntheticScenario& scenario, std::size_t n_target, std::size_t n_prior) {
  if (n_target < 1 || n_prior < 1) throw Error(ErrorCode::kInvalidArgument, "counts must be >= 1");
  if (scenario.id == ScenarioId::kFig2Toy) return generate_fig2(scenario, n_target, n_prior);
  if (scenario.target_spec.empty() || scenario.prior_spec.empty() ||
      scenario.target_spec.dim() != scenario.prior_spec.dim()) {
    throw Error(ErrorCode::kInvalidArgument, "scenario mixtures are missing or differ in dimension");
  }

  Rng rng(scenario.rng_seed);
  std::vector<std::size_t> target_components;
  std::vector<std::size_t> prior_components;
  RowMatrix target = sample_rows(scenario.target_spec, rng, n_target, target_components);
  RowMatrix raw_prior = sample_rows(scenario.prior_spec, rng, n_prior, prior_components);

  // Group prior rows by component, keeping generation order within a group.
  std::vector<std::size_t> order(n_prior);
  for (std::size_t i = 0; i < n_prior; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prior_components[a] < prior_components[b];
  });
  RowMatrix prior(raw_prior.rows(), raw_prior.cols());
  std::vector<RowMetadata> meta(n_prior);
  std::vector<bool> relevant(n_prior);
  const auto& comps = scenario.prior_spec.components();
  std::size_t pos = 0;
  std::int64_t episode = 0;
  while (pos < n_prior) {
    const std::size_t comp = prior_components[order[pos]];
    std::size_t group_end = pos;
    while (group_end < n_prior && prior_components[order[group_end]] == comp) ++group_end;
    for (std::size_t start = pos; start < group_end; start += kSyntheticEpisodeLength) {
      const auto len = static_cast<std::int64_t>(
          std::min<std::size_t>(kSyntheticEpisodeLength, group_end - start));
      for (std::int64_t s = 0; s < len; ++s) {
        const std::size_t row = start + static_cast<std::size_t>(s);
        prior.row(static_cast<Eigen::Index>(row)) = raw_prior.row(static_cast<Eigen::Index>(order[row]));
        meta[row] = {episode, s, len, comps[comp].name};
        relevant[row] = comps[comp].relevance == Relevance::kRelevant;
      }
      ++episode;
    }
    pos = group_end;
  }

  const std::string stem = std::string(to_string(scenario.id));
  std::string tid = content_id(target, stem + "_target");
  std::string pid = content_id(prior, stem + "_prior");
  SyntheticData out{EmbeddingDataset(std::move(target), std::move(tid)),
                    EmbeddingDataset(std::move(prior), std::move(pid)),
                    std::move(meta),
                    std::move(relevant),
                    {},
                    OracleDensities{scenario.target_spec, scenario.prior_spec},
                    std::nullopt,
                    std::nullopt,
                    std::nullopt};
  for (const GaussianComponent& c : comps) out.labels[c.name] = c.relevance;
  return out;
}

RetrievalQuality evaluate_retrieval(const RetrievalManifest& manifest, const std::vector<bool>& relevant) {
  if (relevant.size() != manifest.prior_rows) {
    throw Error(ErrorCode::kRowCountMismatch, "relevance labels cover " + std::to_string(relevant.size()) +
                                                  " rows, manifest prior has " +
                                                  std::to_string(manifest.prior_rows));
  }
  validate_manifest(manifest);
  RetrievalQuality q;
  q.selected = manifest.selected_indices.size();
  q.relevant = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
  for (std::size_t i : manifest.selected_indices) q.true_positives += relevant[i] ? 1 : 0;
  q.precision = q.selected ? static_cast<double>(q.true_positives) / static_cast<double>(q.selected) : 0.0;
  q.recall = q.relevant ? static_cast<double>(q.true_positives) / static_cast<double>(q.relevant) : 0.0;
  return q;
}

std::vector<bool> relevant_rows(std::span<const RowMetadata> meta, const RelevanceLabels& labels) {
  std::vector<bool> out(meta.size(), false);
  for (std::size_t i = 0; i < meta.size(); ++i) {
    if (!meta[i].task_label) continue;
    const auto it = labels.find(*meta[i].task_label);
    out[i] = it != labels.end() && it->second == Relevance::kRelevant;
  }
  return out;
}

WeightErrorStats oracle_weight_check(const OracleDensities& oracle, const ScoreVector& estimated,
                                     const EmbeddingDataset& queries) {
  if (estimated.method != ScoreMethod::kIwr) {
    throw Error(ErrorCode::kMethodMismatch,
                "oracle check needs iwr scores, got " + std::string(to_string(estimated.method)));
  }
  if (estimated.values.size() != queries.rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "score count differs from query rows");
  }
  const std::size_t n = queries.rows();
  std::vector<double> log_prior(n);
  for (std::size_t i = 0; i < n; ++i) log_prior[i] = oracle.log_prior(queries.row(i));
  std::vector<double> sorted = log_prior;
  const std::size_t cut_index = (n - 1) / 10;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut_index), sorted.end());
  const double cutoff = sorted[cut_index];

  WeightErrorStats stats;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (log_prior[i] < cutoff) continue;
    const double err = std::abs(estimated.values[i] - (oracle.log_target(queries.row(i)) - log_prior[i]));
    total += err;
    stats.max_abs_error = std::max(stats.max_abs_error, err);
    ++stats.evaluated;
  }
  stats.mean_abs_error = stats.evaluated ? total / static_cast<double>(stats.evaluated) : 0.0;
  return stats;
}

void save_oracle_parameters(const SyntheticScenario& scenario, const SyntheticData& data,
                            const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema"] = "iwr-synth/1";
  j["scenario"] = to_string(scenario.id);
  j["seed"] = scenario.rng_seed;
  j["dim"] = scenario.dim;
  j["n_target"] = data.target.rows();
  j["n_prior"] = data.prior.rows();
  if (data.oracle) {
    j["target_mixture"] = mixture_to_json(data.oracle->target);
    j["prior_mixture"] = mixture_to_json(data.oracle->prior);
  }
  if (data.fig2) {
    j["cluster_probe"] = *data.cluster_probe;
    j["isolated_probe"] = *data.isolated_probe;
    j["geometry"] = {{"arc_radius", data.fig2->arc_radius},
                     {"outlier_distance", data.fig2->outlier_distance},
                     {"probe_offset", data.fig2->probe_offset},
                     {"arc_points", data.fig2->arc_points}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace iwr
