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
#include "iwr/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "iwr/error.hpp"
#include "iwr/hash.hpp"
#include "iwr/numeric.hpp"
#include "iwr/parallel.hpp"
#include "iwr/random.hpp"

namespace iwr {

namespace {

constexpr std::size_t kRowChunk = 64;

void check_same_dim(const EmbeddingDataset& a, const EmbeddingDataset& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "target has dimension " + std::to_string(a.dim()) + ", prior has " +
                    std::to_string(b.dim()));
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

ScoreVector make_scores(ScoreMethod method, std::vector<double> values, const ScoringConfig& config,
                        const EmbeddingDataset& target_like, const EmbeddingDataset& prior) {
  ScoreVector out;
  out.values = std::move(values);
  out.method = method;
  out.log_space = is_log_space(method);
  out.target_source_id = target_like.source_id();
  out.prior_source_id = prior.source_id();
  out.config = config;
  out.config.method = method;
  out.config_fingerprint = config_fingerprint(out.config, out.target_source_id, out.prior_source_id);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (!std::isfinite(out.values[i])) {
      throw Error(ErrorCode::kNonFinite, std::string(to_string(method)) + " score for prior row " +
                                             std::to_string(i));
    }
  }
  return out;
}

nlohmann::json config_to_json(const ScoringConfig& c) {
  nlohmann::json j;
  j["method"] = to_string(c.method);
  j["bandwidth_scale"] = c.bandwidth.scale_c;
  j["lse_temperature"] = c.lse_temperature ? nlohmann::json(*c.lse_temperature) : nlohmann::json();
  j["batch_size"] = c.batches.batch_size;
  j["num_batches"] = c.batches.num_batches;
  j["seed"] = c.batches.rng_seed;
  j["leave_self_out"] = c.leave_self_out;
  return j;
}

ScoringConfig config_from_json(const nlohmann::json& j) {
  ScoringConfig c;
  c.method = parse_score_method(j.at("method").get<std::string>());
  c.bandwidth.scale_c = j.at("bandwidth_scale").get<double>();
  if (!j.at("lse_temperature").is_null()) c.lse_temperature = j.at("lse_temperature").get<double>();
  c.batches.batch_size = j.at("batch_size").get<std::size_t>();
  c.batches.num_batches = j.at("num_batches").get<std::size_t>();
  c.batches.rng_seed = j.at("seed").get<std::uint64_t>();
  c.leave_self_out = j.at("leave_self_out").get<bool>();
  return c;
}

// Placeholder id for scores that never looked at a target dataset directly.
EmbeddingDataset id_only(const std::string& id) {
  return EmbeddingDataset(RowMatrix::Zero(1, 1), id);
}

}  // namespace

std::string_view to_string(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::kNnL2: return "nn_l2";
    case ScoreMethod::kLse: return "lse";
    case ScoreMethod::kKdeTarget: return "kde_target";
    case ScoreMethod::kIwr: return "iwr";
  }
  return "unknown";
}

ScoreMethod parse_score_method(std::string_view name) {
  if (name == "nn_l2" || name == "nn") return ScoreMethod::kNnL2;
  if (name == "lse") return ScoreMethod::kLse;
  if (name == "kde_target" || name == "kde") return ScoreMethod::kKdeTarget;
  if (name == "iwr") return ScoreMethod::kIwr;
  throw Error(ErrorCode::kInvalidArgument, "unknown scoring method '" + std::string(name) + "'");
}

bool is_log_space(ScoreMethod method) {
  return method == ScoreMethod::kKdeTarget || method == ScoreMethod::kIwr;
}

PriorBatchSpec default_batch_spec(std::size_t prior_rows, std::uint64_t seed) {
  return {std::min<std::size_t>(4096, prior_rows), 8, seed};
}

std::string config_fingerprint(const ScoringConfig& config, std::string_view target_id,
                               std::string_view prior_id) {
  Fnv1a h;
  h.update("iwr-scores/1").update(to_string(config.method));
  h.update_f64(config.bandwidth.scale_c);
  h.update_u64(config.lse_temperature.has_value());
  h.update_f64(config.lse_temperature.value_or(0.0));
  h.update_u64(config.batches.batch_size).update_u64(config.batches.num_batches);
  h.update_u64(config.batches.rng_seed).update_u64(config.leave_self_out);
  h.update(target_id).update(prior_id);
  return h.hex();
}

ScoreVector score_nn_l2(const EmbeddingDataset& target, const EmbeddingDataset& prior,
                        unsigned threads) {
  check_same_dim(target, prior);
  std::vector<double> values(prior.rows());
  parallel_for_chunks(
      prior.rows(), kRowChunk,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < target.rows(); ++j) {
            best = std::min(best, squared_distance(prior.row(i), target.row(j)));
          }
          values[i] = -best;
        }
      },
      threads);
  ScoringConfig config;
  return make_scores(ScoreMethod::kNnL2, std::move(values), config, target, prior);
}

ScoreVector score_lse(const EmbeddingDataset& target, const EmbeddingDataset& prior,
                      double temperature, unsigned threads) {
  check_same_dim(target, prior);
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "lse temperature must be positive");
  }
  const double h2 = temperature * temperature;
  std::vector<double> values(prior.rows());
  parallel_for_chunks(
      prior.rows(), kRowChunk,
      [&](std::size_t begin, std::size_t end) {
        std::vector<double> exponents(target.rows());
        for (std::size_t i = begin; i < end; ++i) {
          for (std::size_t j = 0; j < target.rows(); ++j) {
            exponents[j] = -squared_distance(prior.row(i), target.row(j)) / h2;
          }
          values[i] = log_sum_exp(exponents) / h2;
        }
      },
      threads);
  ScoringConfig config;
  config.lse_temperature = temperature;
  return make_scores(ScoreMethod::kLse, std::move(values), config, target, prior);
}

ScoreVector score_kde_target(const GaussianKde& target_kde, const EmbeddingDataset& prior,
                             unsigned threads) {
  if (target_kde.dim() != prior.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "target kde has dimension " + std::to_string(target_kde.dim()) + ", prior has " +
                    std::to_string(prior.dim()));
  }
  std::vector<double> values = target_kde.log_density(prior.data(), threads);
  ScoringConfig config;
  return make_scores(ScoreMethod::kKdeTarget, std::move(values), config,
                     id_only(content_id(target_kde.support(), "target")), prior);
}

std::vector<std::vector<std::size_t>> sample_prior_batches(std::size_t prior_rows,
                                                           const PriorBatchSpec& spec) {
  if (spec.batch_size < 2) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 2");
  if (spec.num_batches < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one batch");
  if (spec.batch_size > prior_rows) {
    throw Error(ErrorCode::kInvalidArgument, "batch size " + std::to_string(spec.batch_size) +
                                                 " exceeds prior rows " + std::to_string(prior_rows));
  }
  Rng rng(spec.rng_seed);
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(spec.num_batches);
  std::vector<std::size_t> pool(prior_rows);
  for (std::size_t k = 0; k < spec.num_batches; ++k) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // Partial Fisher-Yates: the first batch_size slots become the sample.
    for (std::size_t i = 0; i < spec.batch_size; ++i) {
      const std::size_t j = i + uniform_index(rng, prior_rows - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> batch(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.batch_size));
    std::sort(batch.begin(), batch.end());
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<PriorBatch> fit_prior_batched(const EmbeddingDataset& prior, const PriorBatchSpec& spec,
                                          const BandwidthSpec& bandwidth) {
  std::vector<PriorBatch> out;
  for (auto& indices : sample_prior_batches(prior.rows(), spec)) {
    RowMatrix rows(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(prior.dim()));
    for (std::size_t r = 0; r < indices.size(); ++r) {
      rows.row(static_cast<Eigen::Index>(r)) = prior.data().row(static_cast<Eigen::Index>(indices[r]));
    }
    GaussianKde kde = fit_kde(rows, bandwidth);
    out.push_back(PriorBatch{std::move(indices), std::move(kde)});
  }
  return out;
}

ScoreVector score_importance_weight(const GaussianKde& target_kde,
                                    const std::vector<PriorBatch>& prior_batches,
                                    const EmbeddingDataset& prior,
                                    const ImportanceOptions& options) {
  if (prior_batches.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "importance weights need at least one prior batch");
  }
  if (target_kde.dim() != prior.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "target kde has dimension " + std::to_string(target_kde.dim()) + ", prior has " +
                    std::to_string(prior.dim()));
  }
  for (const PriorBatch& b : prior_batches) {
    if (b.kde.dim() != prior.dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "prior batch kde dimension differs from prior");
    }
  }

  const std::size_t n = prior.rows();
  const std::size_t k_count = prior_batches.size();
  // batch_logs[k * n + i] = log p_k(prior_i)
  std::vector<double> batch_logs(k_count * n);
  for (std::size_t k = 0; k < k_count; ++k) {
    const PriorBatch& batch = prior_batches[k];
    std::vector<double> logs = batch.kde.log_density(prior.data(), options.threads);
    if (options.leave_self_out) {
      for (std::size_t pos = 0; pos < batch.indices.size(); ++pos) {
        const std::size_t row = batch.indices[pos];
        if (row >= n) throw Error(ErrorCode::kIndexOutOfRange, "batch index beyond prior rows");
        logs[row] = batch.kde.log_density_excluding(prior.row(row), pos);
      }
    }
    std::copy(logs.begin(), logs.end(), batch_logs.begin() + static_cast<std::ptrdiff_t>(k * n));
  }

  std::vector<double> values = target_kde.log_density(prior.data(), options.threads);
  std::vector<double> per_row(k_count);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < k_count; ++k) per_row[k] = batch_logs[k * n + i];
    values[i] -= log_mean_exp(per_row);
  }

  ScoringConfig config;
  config.batches.batch_size = prior_batches.front().indices.size();
  config.batches.num_batches = k_count;
  config.leave_self_out = options.leave_self_out;
  return make_scores(ScoreMethod::kIwr, std::move(values), config,
                     id_only(content_id(target_kde.support(), "target")), prior);
}

ScoreVector compute_scores(const ScoringConfig& config, const EmbeddingDataset& target,
                           const EmbeddingDataset& prior, unsigned threads) {
  check_same_dim(target, prior);
  ScoreVector scores;
  switch (config.method) {
    case ScoreMethod::kNnL2:
      scores = score_nn_l2(target, prior, threads);
      break;
    case ScoreMethod::kLse: {
      const double temperature =
          config.lse_temperature.value_or(scott_bandwidth(config.bandwidth, target.rows(), target.dim()));
      scores = score_lse(target, prior, temperature, threads);
      break;
    }
    case ScoreMethod::kKdeTarget:
      scores = score_kde_target(fit_kde(target, config.bandwidth), prior, threads);
      break;
    case ScoreMethod::kIwr: {
      const GaussianKde target_kde = fit_kde(target, config.bandwidth);
      const auto batches = fit_prior_batched(prior, config.batches, config.bandwidth);
      scores = score_importance_weight(target_kde, batches, prior,
                                       ImportanceOptions{config.leave_self_out, threads});
      break;
    }
  }
  scores.config = config;
  scores.target_source_id = target.source_id();
  scores.prior_source_id = prior.source_id();
  scores.config_fingerprint = config_fingerprint(config, target.source_id(), prior.source_id());
  return scores;
}

std::filesystem::path score_sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_scores(const ScoreVector& scores, const std::filesystem::path& path) {
  RowMatrix column = Eigen::Map<const RowMatrix>(scores.values.data(),
                                                 static_cast<Eigen::Index>(scores.values.size()), 1);
  save_embeddings(EmbeddingDataset(std::move(column), "scores"), path);

  nlohmann::ordered_json j;
  j["schema"] = "iwr-scores/1";
  j["engine_version"] = IWR_ENGINE_VERSION;
  j["method"] = to_string(scores.method);
  j["log_space"] = scores.log_space;
  j["fingerprint"] = scores.config_fingerprint;
  j["count"] = scores.values.size();
  j["target_source_id"] = scores.target_source_id;
  j["prior_source_id"] = scores.prior_source_id;
  j["config"] = config_to_json(scores.config);
  std::ofstream out(score_sidecar_path(path), std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + score_sidecar_path(path).string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + score_sidecar_path(path).string());
}

ScoreVector load_scores(const std::filesystem::path& path) {
  const EmbeddingDataset column = load_embeddings(path, EmbeddingFormat::kBinary);
  if (column.dim() != 1) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": score files have d = 1");
  }
  std::ifstream in(score_sidecar_path(path));
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + score_sidecar_path(path).string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, score_sidecar_path(path).string() + ": " + e.what());
  }
  ScoreVector scores;
  try {
    scores.method = parse_score_method(j.at("method").get<std::string>());
    scores.log_space = j.at("log_space").get<bool>();
    scores.config_fingerprint = j.at("fingerprint").get<std::string>();
    scores.target_source_id = j.at("target_source_id").get<std::string>();
    scores.prior_source_id = j.at("prior_source_id").get<std::string>();
    scores.config = config_from_json(j.at("config"));
    if (j.at("count").get<std::size_t>() != column.rows()) {
      throw Error(ErrorCode::kPayloadMismatch, "sidecar count differs from score file rows");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, score_sidecar_path(path).string() + ": " + e.what());
  }
  scores.values.assign(column.data().data(), column.data().data() + column.rows());
  return scores;
}

}  // namespace iwr
