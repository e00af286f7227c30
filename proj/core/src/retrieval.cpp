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
#include "iwr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "iwr/error.hpp"
#include "iwr/random.hpp"

namespace iwr {

namespace {

RetrievalManifest manifest_shell(const ScoreVector& scores, SelectionRule rule, double param) {
  RetrievalManifest m;
  m.rule = rule;
  m.rule_param = param;
  m.method = scores.method;
  m.prior_rows = scores.values.size();
  m.config_fingerprint = scores.config_fingerprint;
  m.prior_source_id = scores.prior_source_id;
  m.target_source_id = scores.target_source_id;
  return m;
}

void fill_scores(RetrievalManifest& m, const ScoreVector& scores) {
  m.scores_at_selection.clear();
  m.scores_at_selection.reserve(m.selected_indices.size());
  for (std::size_t i : m.selected_indices) m.scores_at_selection.push_back(scores.values[i]);
}

void check_finite_scores(const ScoreVector& scores) {
  if (scores.values.empty()) throw Error(ErrorCode::kEmptyDataset, "no scores");
  for (std::size_t i = 0; i < scores.values.size(); ++i) {
    if (!std::isfinite(scores.values[i])) {
      throw Error(ErrorCode::kNonFinite, "score for prior row " + std::to_string(i));
    }
  }
}

SelectionRule parse_rule(const std::string& name) {
  if (name == "fraction") return SelectionRule::kFraction;
  if (name == "threshold") return SelectionRule::kThreshold;
  if (name == "resample") return SelectionRule::kResample;
  throw Error(ErrorCode::kMalformedHeader, "unknown selection rule '" + name + "'");
}

}  // namespace

std::string_view to_string(SelectionRule rule) {
  switch (rule) {
    case SelectionRule::kFraction: return "fraction";
    case SelectionRule::kThreshold: return "threshold";
    case SelectionRule::kResample: return "resample";
  }
  return "unknown";
}

std::size_t fraction_count(double fraction, std::size_t rows) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows)));
}

RetrievalManifest select_by_fraction(const ScoreVector& scores, double fraction) {
  check_finite_scores(scores);
  const std::size_t n = scores.values.size();
  const std::size_t k = fraction_count(fraction, n);
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "fraction " + std::to_string(fraction) + " of " +
                                                 std::to_string(n) + " rows selects nothing");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores.values[a] != scores.values[b]) return scores.values[a] > scores.values[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  order.resize(k);
  std::sort(order.begin(), order.end());

  RetrievalManifest m = manifest_shell(scores, SelectionRule::kFraction, fraction);
  m.selected_indices = std::move(order);
  fill_scores(m, scores);
  return m;
}

RetrievalManifest select_by_threshold(const ScoreVector& scores, double threshold) {
  check_finite_scores(scores);
  RetrievalManifest m = manifest_shell(scores, SelectionRule::kThreshold, threshold);
  for (std::size_t i = 0; i < scores.values.size(); ++i) {
    if (scores.values[i] >= threshold) m.selected_indices.push_back(i);
  }
  fill_scores(m, scores);
  return m;
}

RetrievalManifest resample_by_weight(const ScoreVector& scores, std::size_t sample_count,
                                     std::uint64_t rng_seed, bool with_replacement) {
  check_finite_scores(scores);
  if (!scores.log_space) {
    throw Error(ErrorCode::kMethodMismatch, std::string(to_string(scores.method)) +
                                                " scores are not log weights; resampling needs "
                                                "kde_target or iwr");
  }
  const std::size_t n = scores.values.size();
  if (sample_count < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
  if (!with_replacement && sample_count > n) {
    throw Error(ErrorCode::kInvalidArgument, "cannot draw " + std::to_string(sample_count) +
                                                 " rows without replacement from " + std::to_string(n));
  }

  RetrievalManifest m =
      manifest_shell(scores, SelectionRule::kResample, static_cast<double>(sample_count));
  m.rng_seed = rng_seed;
  Rng rng(rng_seed);

  if (with_replacement) {
    const double peak = *std::max_element(scores.values.begin(), scores.values.end());
    std::vector<double> cumulative(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += std::exp(scores.values[i] - peak);
      cumulative[i] = total;
    }
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t s = 0; s < sample_count; ++s) {
      const double u = uniform01(rng) * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      ++counts[static_cast<std::size_t>(it - cumulative.begin())];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[i] > 0) {
        m.selected_indices.push_back(i);
        m.multiplicities.push_back(counts[i]);
      }
    }
  } else {
    std::vector<double> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = scores.values[i] + standard_gumbel(rng);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sample_count),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        if (keys[a] != keys[b]) return keys[a] > keys[b];
                        return a < b;
                      });
    order.resize(sample_count);
    std::sort(order.begin(), order.end());
    m.selected_indices = std::move(order);
  }
  fill_scores(m, scores);
  return m;
}

CotrainWeights cotrain_weights(std::size_t target_count, std::size_t retrieved_count, double alpha) {
  if (target_count < 1 || retrieved_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "co-training needs non-empty target and retrieved sets");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
  return {alpha / static_cast<double>(target_count),
          (1.0 - alpha) / static_cast<double>(retrieved_count), alpha};
}

std::size_t retrieved_sample_count(const RetrievalManifest& manifest) {
  if (manifest.multiplicities.empty()) return manifest.selected_indices.size();
  return std::accumulate(manifest.multiplicities.begin(), manifest.multiplicities.end(), std::size_t{0});
}

void validate_manifest(const RetrievalManifest& m) {
  for (std::size_t i = 0; i < m.selected_indices.size(); ++i) {
    if (m.selected_indices[i] >= m.prior_rows) {
      throw Error(ErrorCode::kIndexOutOfRange, "selected index " + std::to_string(m.selected_indices[i]) +
                                                   " of " + std::to_string(m.prior_rows) + " prior rows");
    }
    if (i > 0 && m.selected_indices[i] <= m.selected_indices[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "selected indices are not strictly increasing");
    }
  }
  if (m.scores_at_selection.size() != m.selected_indices.size()) {
    throw Error(ErrorCode::kInvalidArgument, "scores_at_selection length differs from selection");
  }
  if (!m.multiplicities.empty() && m.multiplicities.size() != m.selected_indices.size()) {
    throw Error(ErrorCode::kInvalidArgument, "multiplicities length differs from selection");
  }
}

RetrievedData materialize(const RetrievalManifest& manifest, const EmbeddingDataset& prior,
                          const std::vector<RowMetadata>* prior_meta) {
  validate_manifest(manifest);
  if (manifest.prior_rows != prior.rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "manifest was built for " +
                                                  std::to_string(manifest.prior_rows) +
                                                  " prior rows, dataset has " + std::to_string(prior.rows()));
  }
  if (manifest.selected_indices.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "manifest selects no rows");
  }
  RetrievedData out{prior.select_rows(manifest.selected_indices, prior.source_id() + "/retrieved"),
                    std::nullopt};
  if (prior_meta != nullptr) {
    validate_pairing(prior, *prior_meta);
    std::vector<RowMetadata> subset;
    subset.reserve(manifest.selected_indices.size());
    for (std::size_t i : manifest.selected_indices) subset.push_back((*prior_meta)[i]);
    out.meta = std::move(subset);
  }
  return out;
}

void save_manifest(const RetrievalManifest& m, const std::filesystem::path& path) {
  validate_manifest(m);
  nlohmann::ordered_json j;
  j["schema"] = "iwr-manifest/1";
  j["engine_version"] = IWR_ENGINE_VERSION;
  j["method"] = to_string(m.method);
  j["rule"] = to_string(m.rule);
  j["rule_param"] = m.rule_param;
  if (m.rule == SelectionRule::kResample) j["rng_seed"] = m.rng_seed;
  j["config_fingerprint"] = m.config_fingerprint;
  j["prior_source_id"] = m.prior_source_id;
  j["target_source_id"] = m.target_source_id;
  j["prior_rows"] = m.prior_rows;
  j["selected_count"] = m.selected_indices.size();
  j["selected_indices"] = m.selected_indices;
  j["scores_at_selection"] = m.scores_at_selection;
  if (!m.multiplicities.empty()) j["multiplicities"] = m.multiplicities;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

RetrievalManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  RetrievalManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    m.method = parse_score_method(j.at("method").get<std::string>());
    m.rule = parse_rule(j.at("rule").get<std::string>());
    m.rule_param = j.at("rule_param").get<double>();
    m.rng_seed = j.value("rng_seed", std::uint64_t{0});
    m.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    m.prior_source_id = j.at("prior_source_id").get<std::string>();
    m.target_source_id = j.at("target_source_id").get<std::string>();
    m.prior_rows = j.at("prior_rows").get<std::size_t>();
    m.selected_indices = j.at("selected_indices").get<std::vector<std::size_t>>();
    m.scores_at_selection = j.at("scores_at_selection").get<std::vector<double>>();
    if (j.contains("multiplicities")) {
      m.multiplicities = j.at("multiplicities").get<std::vector<std::size_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": " + e.what());
  }
  validate_manifest(m);
  return m;
}

void save_weights(const RetrievalManifest& manifest, const CotrainWeights& weights,
                  std::size_t target_count, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.precision(17);
  out << "dataset,index,weight\n";
  for (std::size_t i = 0; i < target_count; ++i) {
    out << "target," << i << ',' << weights.target_weight_per_sample << '\n';
  }
  for (std::size_t s = 0; s < manifest.selected_indices.size(); ++s) {
    const double mult = manifest.multiplicities.empty() ? 1.0 : static_cast<double>(manifest.multiplicities[s]);
    out << "prior," << manifest.selected_indices[s] << ',' << mult * weights.retrieved_weight_per_sample << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace iwr
