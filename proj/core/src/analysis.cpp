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
#include "iwr/analysis.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include "json.hpp"

#include "iwr/error.hpp"

namespace iwr {

namespace {

void check_pairing(const RetrievalManifest& manifest, std::span<const RowMetadata> meta) {
  if (meta.size() != manifest.prior_rows) {
    throw Error(ErrorCode::kRowCountMismatch, "metadata has " + std::to_string(meta.size()) +
                                                  " rows, manifest prior has " +
                                                  std::to_string(manifest.prior_rows));
  }
  validate_manifest(manifest);
  validate_metadata(meta);
}

bool any_task_labels(std::span<const RowMetadata> meta) {
  for (const RowMetadata& m : meta) {
    if (m.task_label) return true;
  }
  return false;
}

std::string task_of(const RowMetadata& m) {
  return m.task_label ? *m.task_label : std::string(kUnlabeledTask);
}

}  // namespace

std::string_view to_string(Relevance relevance) {
  switch (relevance) {
    case Relevance::kRelevant: return "relevant";
    case Relevance::kMixed: return "mixed";
    case Relevance::kHarmful: return "harmful";
  }
  return "harmful";
}

Relevance parse_relevance(std::string_view name) {
  if (name == "relevant") return Relevance::kRelevant;
  if (name == "mixed") return Relevance::kMixed;
  if (name == "harmful") return Relevance::kHarmful;
  throw Error(ErrorCode::kInvalidArgument, "unknown relevance label '" + std::string(name) + "'");
}

RelevanceLabels load_relevance_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  RelevanceLabels labels;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, path.string() + ": expected an object");
    for (const auto& [task, value] : j.items()) labels[task] = parse_relevance(value.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return labels;
}

void save_relevance_labels(const RelevanceLabels& labels, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [task, rel] : labels) j[task] = to_string(rel);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

TaskBreakdown task_breakdown(const RetrievalManifest& manifest, std::span<const RowMetadata> meta,
                             const RelevanceLabels& labels) {
  check_pairing(manifest, meta);
  TaskBreakdown out;
  if (!any_task_labels(meta)) return out;
  for (std::size_t i : manifest.selected_indices) ++out.per_task_counts[task_of(meta[i])];
  const auto total = static_cast<double>(manifest.selected_indices.size());
  for (const auto& [task, count] : out.per_task_counts) {
    out.per_task_fractions[task] = static_cast<double>(count) / total;
    const auto it = labels.find(task);
    if (it != labels.end()) {
      out.relevance_labels[task] = it->second;
    } else {
      out.relevance_labels[task] = Relevance::kHarmful;
      out.warnings.push_back("task '" + task + "' has no relevance label; treating it as harmful");
    }
  }
  return out;
}

std::size_t timestep_bin(std::int64_t step_index, std::int64_t episode_length, std::size_t bin_count) {
  if (bin_count < 1) throw Error(ErrorCode::kInvalidArgument, "bin count must be >= 1");
  if (episode_length < 1 || step_index < 0 || step_index >= episode_length) {
    throw Error(ErrorCode::kMetadataInvalid, "step " + std::to_string(step_index) +
                                                 " outside episode of length " +
                                                 std::to_string(episode_length));
  }
  const auto step = static_cast<std::uint64_t>(step_index);
  const auto length = static_cast<std::uint64_t>(episode_length);
  if (step <= UINT64_MAX / bin_count) return static_cast<std::size_t>(step * bin_count / length);
  // step * bins would overflow; step < length keeps the quotient below bin_count.
  const auto bin = static_cast<std::size_t>(static_cast<long double>(step) * bin_count / length);
  return std::min(bin, bin_count - 1);
}

TimestepHistogram timestep_histogram(const RetrievalManifest& manifest,
                                     std::span<const RowMetadata> meta, std::size_t bin_count) {
  if (bin_count < 1) throw Error(ErrorCode::kInvalidArgument, "bin count must be >= 1");
  check_pairing(manifest, meta);
  TimestepHistogram h;
  h.bin_count = bin_count;
  h.counts.assign(bin_count, 0);
  for (std::size_t i : manifest.selected_indices) {
    ++h.counts[timestep_bin(meta[i].step_index, meta[i].episode_length, bin_count)];
  }
  h.normalized.assign(bin_count, 0.0);
  const auto total = static_cast<double>(manifest.selected_indices.size());
  if (total > 0) {
    for (std::size_t b = 0; b < bin_count; ++b) h.normalized[b] = static_cast<double>(h.counts[b]) / total;
  }
  return h;
}

std::map<std::string, std::vector<std::size_t>> task_bin_counts(const RetrievalManifest& manifest,
                                                                std::span<const RowMetadata> meta,
                                                                std::size_t bin_count) {
  check_pairing(manifest, meta);
  std::map<std::string, std::vector<std::size_t>> out;
  if (!any_task_labels(meta)) return out;
  for (std::size_t i : manifest.selected_indices) {
    auto& bins = out[task_of(meta[i])];
    bins.resize(bin_count, 0);
    ++bins[timestep_bin(meta[i].step_index, meta[i].episode_length, bin_count)];
  }
  return out;
}

AnalysisReport build_report(const RetrievalManifest& manifest, std::span<const RowMetadata> meta,
                            const RelevanceLabels& labels, std::size_t bin_count) {
  AnalysisReport r;
  r.method = std::string(to_string(manifest.method));
  r.config_fingerprint = manifest.config_fingerprint;
  r.selection_size = manifest.selected_indices.size();
  r.tasks = task_breakdown(manifest, meta, labels);
  r.task_bins = task_bin_counts(manifest, meta, bin_count);
  r.histogram = timestep_histogram(manifest, meta, bin_count);
  return r;
}

void emit_report(const AnalysisReport& report, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema"] = "iwr-report/1";
  j["method"] = report.method;
  j["config_fingerprint"] = report.config_fingerprint;
  j["selection_size"] = report.selection_size;
  if (!report.tasks.empty()) {
    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    for (const auto& [task, count] : report.tasks.per_task_counts) {
      nlohmann::ordered_json row;
      row["task"] = task;
      row["count"] = count;
      row["fraction"] = report.tasks.per_task_fractions.at(task);
      row["relevance"] = to_string(report.tasks.relevance_labels.at(task));
      tasks.push_back(std::move(row));
    }
    j["tasks"] = std::move(tasks);
    nlohmann::ordered_json task_bins = nlohmann::ordered_json::object();
    for (const auto& [task, bins] : report.task_bins) task_bins[task] = bins;
    j["task_bins"] = std::move(task_bins);
  }
  nlohmann::ordered_json hist;
  hist["bin_count"] = report.histogram.bin_count;
  hist["counts"] = report.histogram.counts;
  hist["normalized"] = report.histogram.normalized;
  j["timesteps"] = std::move(hist);
  if (report.ground_truth) {
    const RetrievalQuality& q = *report.ground_truth;
    j["ground_truth"] = {{"precision", q.precision}, {"recall", q.recall},
                         {"true_positives", q.true_positives}, {"selected", q.selected},
                         {"relevant", q.relevant}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

AnalysisReport parse_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  AnalysisReport r;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    r.method = j.at("method").get<std::string>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.selection_size = j.at("selection_size").get<std::size_t>();
    if (j.contains("tasks")) {
      for (const auto& row : j.at("tasks")) {
        const auto task = row.at("task").get<std::string>();
        r.tasks.per_task_counts[task] = row.at("count").get<std::size_t>();
        r.tasks.per_task_fractions[task] = row.at("fraction").get<double>();
        r.tasks.relevance_labels[task] = parse_relevance(row.at("relevance").get<std::string>());
      }
      for (const auto& [task, bins] : j.at("task_bins").items()) {
        r.task_bins[task] = bins.get<std::vector<std::size_t>>();
      }
    }
    const auto& hist = j.at("timesteps");
    r.histogram.bin_count = hist.at("bin_count").get<std::size_t>();
    r.histogram.counts = hist.at("counts").get<std::vector<std::size_t>>();
    r.histogram.normalized = hist.at("normalized").get<std::vector<double>>();
    if (j.contains("ground_truth")) {
      const auto& g = j.at("ground_truth");
      r.ground_truth = RetrievalQuality{g.at("precision").get<double>(), g.at("recall").get<double>(),
                                        g.at("true_positives").get<std::size_t>(),
                                        g.at("selected").get<std::size_t>(),
                                        g.at("relevant").get<std::size_t>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": " + e.what());
  }
  return r;
}

}  // namespace iwr
