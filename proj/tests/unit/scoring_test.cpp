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
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "iwr/error.hpp"
#include "iwr/kde.hpp"
#include "iwr/scoring.hpp"
#include "iwr/synthbench.hpp"
#include "oracles.hpp"

namespace iwr {
namespace {

constexpr double kLog2Minus1 = -0.3068528194400546905827678785418234319245;

EmbeddingDataset rows(std::initializer_list<std::initializer_list<double>> values, const char* id) {
  const std::size_t d = values.begin()->size();
  RowMatrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(d));
  Eigen::Index r = 0;
  for (const auto& row : values) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return EmbeddingDataset(std::move(m), id);
}

EmbeddingDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d, double scale,
                                const char* id) {
  return EmbeddingDataset(testing::random_matrix(rng, n, d, scale), id);
}

double min_gap(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::min(gap, v[i] - v[i - 1]);
  return gap;
}

TEST(ScoreMethod, NamesRoundTrip) {
  for (ScoreMethod m : {ScoreMethod::kNnL2, ScoreMethod::kLse, ScoreMethod::kKdeTarget, ScoreMethod::kIwr}) {
    EXPECT_EQ(parse_score_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_score_method("cosine"), Error);
  EXPECT_TRUE(is_log_space(ScoreMethod::kIwr));
  EXPECT_TRUE(is_log_space(ScoreMethod::kKdeTarget));
  EXPECT_FALSE(is_log_space(ScoreMethod::kNnL2));
}

TEST(NnL2, Examples) {
  const auto target = rows({{0, 0}, {1, 0}}, "t");
  const auto s = score_nn_l2(target, rows({{0.4, 0}, {1, 0}}, "p"));
  EXPECT_DOUBLE_EQ(s.values[0], -0.16);
  EXPECT_EQ(s.values[1], 0.0);
  EXPECT_EQ(s.method, ScoreMethod::kNnL2);
  EXPECT_FALSE(s.log_space);
}

TEST(NnL2, MatchesBruteForce) {
  std::mt19937_64 rng(8);
  const auto target = random_dataset(rng, 57, 5, 1.0, "t");
  const auto prior = random_dataset(rng, 200, 5, 1.5, "p");
  const auto s = score_nn_l2(target, prior);
  ASSERT_EQ(s.values.size(), 200u);
  for (std::size_t i = 0; i < 200; ++i) {
    EXPECT_EQ(s.values[i], -testing::brute_min_sq_distance(prior.row(i), target.data()));
    EXPECT_LE(s.values[i], 0.0);
  }
}

TEST(NnL2, DimensionMismatch) {
  EXPECT_THROW(score_nn_l2(rows({{0, 0}}, "t"), rows({{0}}, "p")), Error);
}

TEST(NnL2, ScalingMultipliesBySquare) {
  std::mt19937_64 rng(12);
  const auto target = random_dataset(rng, 30, 3, 1.0, "t");
  const auto prior = random_dataset(rng, 100, 3, 1.0, "p");
  const double s = 4.0;
  const auto base = score_nn_l2(target, prior);
  const auto scaled = score_nn_l2(EmbeddingDataset(target.data() * s, "ts"), EmbeddingDataset(prior.data() * s, "ps"));
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(scaled.values[i], base.values[i] * s * s);
  EXPECT_EQ(testing::ranking(base.values), testing::ranking(scaled.values));
}

TEST(Lse, SingleTarget) {
  const auto s = score_lse(rows({{0}}, "t"), rows({{2}}, "p"), 1.0);
  EXPECT_EQ(s.values[0], -4.0);
  EXPECT_EQ(s.method, ScoreMethod::kLse);
}

TEST(Lse, TwoEquidistantTargets) {
  const auto s = score_lse(rows({{-1}, {1}}, "t"), rows({{0}}, "p"), 1.0);
  EXPECT_NEAR(s.values[0], kLog2Minus1, 1e-15);
}

TEST(Lse, RejectsNonPositiveTemperature) {
  EXPECT_THROW(score_lse(rows({{0}}, "t"), rows({{0}}, "p"), 0.0), Error);
  EXPECT_THROW(score_lse(rows({{0}}, "t"), rows({{0}}, "p"), -1.0), Error);
}

TEST(Lse, SmallTemperatureRecoversNearestNeighbour) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    const auto fixture = testing::separated_fixture(rng, 100, 500);
    const EmbeddingDataset target(fixture.target, "t"), prior(fixture.prior, "p");
    const auto nn = score_nn_l2(target, prior);
    ASSERT_GE(min_gap(nn.values), 1e-2 - 1e-9);
    const auto lse = score_lse(target, prior, 1e-4);
    EXPECT_EQ(testing::ranking(lse.values), testing::ranking(nn.values));
    // The 1/h^2 prefactor makes values scale as -dist^2 / h^4 in this limit.
    for (std::size_t i = 0; i < 500; ++i) EXPECT_NEAR(lse.values[i] * 1e-16, nn.values[i], 1e-9);
  }
}

TEST(KdeTarget, ModeAndDecay) {
  const GaussianKde kde = GaussianKde::from_parameters(rows({{0}}, "t").data(), 1.0, Eigen::MatrixXd::Identity(1, 1));
  const auto s = score_kde_target(kde, rows({{0}, {0.5}, {-1}, {10}}, "p"));
  EXPECT_NEAR(s.values[0], -0.9189385332046727, 1e-15);
  EXPECT_TRUE(s.log_space);
  EXPECT_LT(s.values[3], s.values[1]);
  EXPECT_LT(s.values[3], s.values[2]);
}

TEST(KdeTarget, MatchesOracle) {
  std::mt19937_64 rng(2);
  const auto target = random_dataset(rng, 120, 4, 1.0, "t");
  const auto prior = random_dataset(rng, 50, 4, 1.5, "p");
  const GaussianKde kde = fit_kde(target, {4.0});
  const auto s = score_kde_target(kde, prior);
  for (std::size_t i = 0; i < 50; ++i) {
    const long double oracle =
        testing::naive_kde_log_density(target.data(), kde.bandwidth(), kde.covariance(), prior.row(i));
    EXPECT_LE(std::fabs(std::expm1(static_cast<long double>(s.values[i]) - oracle)), 1e-10);
  }
}

TEST(PriorBatches, DeterministicAndWithoutReplacement) {
  const PriorBatchSpec spec{50, 6, 77};
  const auto a = sample_prior_batches(300, spec);
  EXPECT_EQ(a, sample_prior_batches(300, spec));
  EXPECT_NE(a, sample_prior_batches(300, PriorBatchSpec{50, 6, 78}));
  ASSERT_EQ(a.size(), 6u);
  for (const auto& batch : a) {
    ASSERT_EQ(batch.size(), 50u);
    EXPECT_TRUE(std::is_sorted(batch.begin(), batch.end()));
    EXPECT_EQ(std::adjacent_find(batch.begin(), batch.end()), batch.end());
    EXPECT_LT(batch.back(), 300u);
  }
  EXPECT_THROW(sample_prior_batches(10, PriorBatchSpec{11, 1, 0}), Error);
  EXPECT_THROW(sample_prior_batches(10, PriorBatchSpec{1, 1, 0}), Error);
}

TEST(PriorBatches, BatchesCoverRowsUniformly) {
  // Each row should land in a batch with probability B/N.
  const std::size_t n = 40, b = 10, k = 4000;
  std::vector<std::size_t> hits(n, 0);
  for (const auto& batch : sample_prior_batches(n, PriorBatchSpec{b, k, 5}))
    for (std::size_t i : batch) ++hits[i];
  const double expected = static_cast<double>(k * b) / n;
  const double sd = std::sqrt(expected * (1.0 - static_cast<double>(b) / n));
  for (std::size_t h : hits) EXPECT_NEAR(static_cast<double>(h), expected, 5 * sd);
}

TEST(PriorBatches, FullBatchEqualsFullFit) {
  std::mt19937_64 rng(9);
  const auto prior = random_dataset(rng, 64, 3, 1.0, "p");
  const auto batches = fit_prior_batched(prior, PriorBatchSpec{64, 1, 3}, {4.0});
  ASSERT_EQ(batches.size(), 1u);
  const GaussianKde full = fit_kde(prior, {4.0});
  EXPECT_EQ(batches[0].kde.support(), full.support());
  EXPECT_EQ(batches[0].kde.bandwidth(), full.bandwidth());
  EXPECT_EQ(batches[0].kde.chol_lower(), full.chol_lower());
  EXPECT_EQ(batches[0].kde.log_density(prior.data()), full.log_density(prior.data()));
}

TEST(PriorBatches, LargePriorShape) {
  std::mt19937_64 rng(130);
  const auto prior = random_dataset(rng, 130000, 32, 1.0, "p");
  const auto batches = fit_prior_batched(prior, PriorBatchSpec{4096, 8, 1}, {4.0});
  ASSERT_EQ(batches.size(), 8u);
  for (const auto& b : batches) {
    EXPECT_EQ(b.kde.count(), 4096u);
    EXPECT_EQ(b.kde.bandwidth(), scott_bandwidth({4.0}, 4096, 32));
    const Eigen::MatrixXd target = b.kde.bandwidth() * b.kde.bandwidth() * b.kde.covariance();
    EXPECT_LE((b.kde.chol_lower() * b.kde.chol_lower().transpose() - target).norm() / target.norm(), 1e-10);
  }
}

TEST(ImportanceWeight, SelfRatioIsZero) {
  std::mt19937_64 rng(15);
  const auto data = random_dataset(rng, 300, 4, 1.0, "same");
  const GaussianKde target = fit_kde(data, {4.0});
  const auto batches = fit_prior_batched(data, PriorBatchSpec{300, 1, 0}, {4.0});
  const auto s = score_importance_weight(target, batches, data);
  for (double v : s.values) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(ImportanceWeight, FullBatchEqualsDirectRatio) {
  std::mt19937_64 rng(16);
  const auto target = random_dataset(rng, 50, 2, 1.0, "t");
  const auto prior = random_dataset(rng, 200, 2, 2.0, "p");
  const GaussianKde tk = fit_kde(target, {4.0});
  const GaussianKde pk = fit_kde(prior, {4.0});
  const auto s = score_importance_weight(tk, fit_prior_batched(prior, PriorBatchSpec{200, 1, 9}, {4.0}), prior);
  const auto lt = tk.log_density(prior.data());
  const auto lp = pk.log_density(prior.data());
  for (std::size_t i = 0; i < 200; ++i) EXPECT_EQ(s.values[i], lt[i] - lp[i]);
}

TEST(ImportanceWeight, MeanOfBatchDensitiesNotMeanOfLogs) {
  std::mt19937_64 rng(18);
  const auto target = random_dataset(rng, 40, 2, 1.0, "t");
  const auto prior = random_dataset(rng, 120, 2, 2.0, "p");
  const GaussianKde tk = fit_kde(target, {4.0});
  const auto batches = fit_prior_batched(prior, PriorBatchSpec{30, 3, 4}, {4.0});
  const auto s = score_importance_weight(tk, batches, prior);
  const auto lt = tk.log_density(prior.data());
  for (std::size_t i = 0; i < 120; ++i) {
    long double mean = 0.0L;
    for (const auto& b : batches) mean += std::exp(static_cast<long double>(b.kde.log_density(prior.row(i))));
    mean /= 3.0L;
    EXPECT_NEAR(s.values[i], static_cast<double>(lt[i] - std::log(mean)), 1e-10);
  }
}

TEST(ImportanceWeight, RecoversAnalyticGaussianRatio) {
  const SyntheticData data = generate(make_scenario(ScenarioId::kGaussianRatio, 3), 10000, 10000);
  const GaussianKde tk = fit_kde(data.target, {1.0});
  const auto batches = fit_prior_batched(data.prior, PriorBatchSpec{10000, 1, 3}, {1.0});
  const auto s = score_importance_weight(tk, batches, rows({{0.0}}, "origin"));
  EXPECT_NEAR(std::exp(s.values[0]), 2.0, 0.15 * 2.0);
}

TEST(ImportanceWeight, LeaveSelfOut) {
  std::mt19937_64 rng(19);
  const auto target = random_dataset(rng, 30, 2, 1.0, "t");
  const auto prior = random_dataset(rng, 60, 2, 1.0, "p");
  const GaussianKde tk = fit_kde(target, {4.0});
  const auto batches = fit_prior_batched(prior, PriorBatchSpec{20, 2, 1}, {4.0});
  const auto with_self = score_importance_weight(tk, batches, prior);
  const auto without = score_importance_weight(tk, batches, prior, ImportanceOptions{true, 0});
  for (std::size_t i = 0; i < 60; ++i) {
    const bool member = std::any_of(batches.begin(), batches.end(), [&](const PriorBatch& b) {
      return std::binary_search(b.indices.begin(), b.indices.end(), i);
    });
    if (member) {
      // Removing a kernel centred on the row lowers its prior density.
      EXPECT_GT(without.values[i], with_self.values[i]);
    } else {
      EXPECT_EQ(without.values[i], with_self.values[i]);
    }
  }
}

TEST(ImportanceWeight, Errors) {
  const auto d = rows({{0, 0}, {1, 1}, {2, 0}}, "d");
  const GaussianKde tk = fit_kde(d, {4.0});
  EXPECT_THROW(score_importance_weight(tk, {}, d), Error);
  EXPECT_THROW(score_importance_weight(tk, fit_prior_batched(d, PriorBatchSpec{3, 1, 0}, {4.0}), rows({{0}}, "x")),
               Error);
}

TEST(Scorers, PermutationEquivariant) {
  std::mt19937_64 rng(23);
  const auto target = random_dataset(rng, 40, 3, 1.0, "t");
  const auto prior = random_dataset(rng, 90, 3, 1.5, "p");
  std::vector<std::size_t> perm(90);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto permuted = prior.select_rows(perm, "pp");
  const GaussianKde tk = fit_kde(target, {4.0});
  // A single full-batch prior KDE does not depend on row order up to rounding.
  const auto b1 = fit_prior_batched(prior, PriorBatchSpec{90, 1, 0}, {4.0});
  const auto b2 = fit_prior_batched(permuted, PriorBatchSpec{90, 1, 0}, {4.0});
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {
      {score_nn_l2(target, prior).values, score_nn_l2(target, permuted).values},
      {score_lse(target, prior, 0.7).values, score_lse(target, permuted, 0.7).values},
      {score_kde_target(tk, prior).values, score_kde_target(tk, permuted).values},
      {score_importance_weight(tk, b1, prior).values, score_importance_weight(tk, b2, permuted).values},
  };
  for (const auto& [base, perm_scores] : cases) {
    for (std::size_t i = 0; i < 90; ++i) EXPECT_NEAR(perm_scores[i], base[perm[i]], 1e-9);
  }
}

TEST(Scorers, ThreadCountDoesNotChangeResults) {
  std::mt19937_64 rng(29);
  const auto target = random_dataset(rng, 70, 4, 1.0, "t");
  const auto prior = random_dataset(rng, 500, 4, 1.0, "p");
  ScoringConfig config;
  config.batches = PriorBatchSpec{100, 3, 11};
  for (ScoreMethod m : {ScoreMethod::kNnL2, ScoreMethod::kLse, ScoreMethod::kKdeTarget, ScoreMethod::kIwr}) {
    config.method = m;
    EXPECT_EQ(compute_scores(config, target, prior, 1).values, compute_scores(config, target, prior, 5).values);
  }
}

TEST(Scorers, Fig2ToyOrdering) {
  const SyntheticData data = generate(make_scenario(ScenarioId::kFig2Toy, 0), 9, 66);
  ASSERT_TRUE(data.cluster_probe && data.isolated_probe);
  const std::size_t c = *data.cluster_probe, iso = *data.isolated_probe;
  ScoringConfig config;
  config.batches = default_batch_spec(data.prior.rows(), 0);
  config.method = ScoreMethod::kNnL2;
  const auto nn = compute_scores(config, data.target, data.prior);
  EXPECT_GT(nn.values[iso], nn.values[c]);
  for (ScoreMethod m : {ScoreMethod::kKdeTarget, ScoreMethod::kIwr, ScoreMethod::kLse}) {
    config.method = m;
    const auto s = compute_scores(config, data.target, data.prior);
    EXPECT_GT(s.values[c], s.values[iso]) << to_string(m);
  }
}

TEST(Fingerprint, SensitiveToEveryField) {
  ScoringConfig base;
  base.batches = PriorBatchSpec{100, 8, 1};
  const std::string f = config_fingerprint(base, "t@1", "p@2");
  EXPECT_EQ(f, config_fingerprint(base, "t@1", "p@2"));
  EXPECT_NE(f, config_fingerprint(base, "t@1", "p@3"));
  EXPECT_NE(f, config_fingerprint(base, "t@0", "p@2"));
  auto changed = base;
  changed.method = ScoreMethod::kKdeTarget;
  EXPECT_NE(f, config_fingerprint(changed, "t@1", "p@2"));
  changed = base;
  changed.bandwidth.scale_c = 2.0;
  EXPECT_NE(f, config_fingerprint(changed, "t@1", "p@2"));
  changed = base;
  changed.batches.rng_seed = 2;
  EXPECT_NE(f, config_fingerprint(changed, "t@1", "p@2"));
  changed = base;
  changed.batches.num_batches = 4;
  EXPECT_NE(f, config_fingerprint(changed, "t@1", "p@2"));
  changed = base;
  changed.leave_self_out = true;
  EXPECT_NE(f, config_fingerprint(changed, "t@1", "p@2"));
  changed = base;
  changed.lse_temperature = 0.5;
  EXPECT_NE(f, config_fingerprint(changed, "t@1", "p@2"));
}

TEST(ScoreFile, RoundTrip) {
  testing::TempDir dir("scores");
  std::mt19937_64 rng(31);
  const auto target = random_dataset(rng, 20, 2, 1.0, "t");
  const auto prior = random_dataset(rng, 80, 2, 1.0, "p");
  ScoringConfig config;
  config.batches = PriorBatchSpec{40, 2, 5};
  config.lse_temperature = 0.25;
  const auto s = compute_scores(config, target, prior);
  save_scores(s, dir / "s.bin");
  const auto back = load_scores(dir / "s.bin");
  EXPECT_EQ(back.values, s.values);
  EXPECT_EQ(back.method, s.method);
  EXPECT_EQ(back.log_space, s.log_space);
  EXPECT_EQ(back.config_fingerprint, s.config_fingerprint);
  EXPECT_EQ(back.target_source_id, s.target_source_id);
  EXPECT_EQ(back.prior_source_id, s.prior_source_id);
  EXPECT_EQ(config_fingerprint(back.config, back.target_source_id, back.prior_source_id), s.config_fingerprint);
}

}  // namespace
}  // namespace iwr
